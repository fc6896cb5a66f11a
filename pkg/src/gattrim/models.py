"""Graph attention networks on the tape engine.

Three scoring variants over the same value path:

  gat     e_ij = leaky([p_i ‖ p_j] @ W2)          (score after projection)
  gatv2   e_ij = leaky([p_i ‖ p_j]) @ W2          (projection after score)
  gatv3   e_ij = leaky([q_i ‖ q_j] @ W2) where q comes from one unweighted
          graph-convolution pass of the layer input through its own
          projection; the aggregation weights stay the plain softmax(e)

Hidden layers concatenate heads and pass through an exponential-linear unit;
the output layer runs a single head and emits raw logits. Dropout hits each
layer's input and the attention coefficients, training mode only; the
snapshot always records coefficients before dropout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, Tensor
from .errors import (
    ConfigError,
    EmptyIndexError,
    MissingSelfLoopError,
    NonFiniteError,
    VariantError,
)
from .graph import Graph
from .optim import Adam, EarlyStopper

VARIANTS = ("gat", "gatv2", "gatv3")

# Flipped on by the test suite: every forward checks that attention sums to
# one per node per head per layer.
VALIDATE_ATTENTION = False


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    weight_decay: float = 0.0001
    max_epochs: int = 600
    patience: int = 50
    hidden_dim: int = 16
    heads: int = 8
    layers: int = 2
    dropout: float = 0.6
    seed: int = 0
    # attention-only refits may run a different budget; None = max_epochs
    finetune_max_epochs: int | None = None
    attention_layer: int = 0
    kmeans_normalize: str = "raw"
    gatv3_edge_budget: int = 150_000

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")
        for name in ("max_epochs", "hidden_dim", "heads", "layers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive count")
        if self.patience < 0:
            raise ConfigError("patience must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.finetune_max_epochs is not None and self.finetune_max_epochs < 0:
            raise ConfigError("finetune_max_epochs must be non-negative")
        if not 0 <= self.attention_layer < self.layers:
            raise ConfigError(
                f"attention_layer {self.attention_layer} outside [0, {self.layers})")
        if self.kmeans_normalize not in ("raw", "l2"):
            raise ConfigError("kmeans_normalize must be 'raw' or 'l2'")


@dataclass
class ModelParams:
    """Per layer, per head: value projection W, scoring vector W2, and for
    gatv3 the Q/K projection Wqk."""
    variant: str
    dropout: float
    heads_per_layer: tuple
    W: list
    W2: list
    Wqk: list | None

    def feature_tensors(self) -> list:
        return [t for row in self.W for t in row]

    def attention_tensors(self) -> list:
        out = [t for row in self.W2 for t in row]
        if self.Wqk is not None:
            out += [t for row in self.Wqk for t in row]
        return out

    def all_tensors(self) -> list:
        return self.feature_tensors() + self.attention_tensors()

    def set_trainable(self, which: str) -> None:
        if which not in ("all", "attention", "none"):
            raise ConfigError(f"unknown trainable group {which!r}")
        for t in self.feature_tensors():
            t.requires_grad = which == "all"
        for t in self.attention_tensors():
            t.requires_grad = which in ("all", "attention")

    def trainable_tensors(self) -> list:
        return [t for t in self.all_tensors() if t.requires_grad]

    def copy(self) -> "ModelParams":
        def dup(rows):
            return [[Tensor(t.values.copy(), requires_grad=t.requires_grad)
                     for t in row] for row in rows]

        return ModelParams(self.variant, self.dropout, self.heads_per_layer,
                           dup(self.W), dup(self.W2),
                           None if self.Wqk is None else dup(self.Wqk))

    def reinit_attention(self, seed: int) -> None:
        """Redraw every scoring-side tensor (W2 and, for gatv3, Wqk) from a
        fresh stream; the value projections W are untouched."""
        rng = np.random.default_rng(seed)
        for k, heads in enumerate(self.heads_per_layer):
            for t in range(heads):
                self.W2[k][t].values[...] = _glorot(rng, self.W2[k][t].values.shape)
                if self.Wqk is not None:
                    self.Wqk[k][t].values[...] = _glorot(rng, self.Wqk[k][t].values.shape)


def _glorot(rng: np.random.Generator, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def build_model(variant: str, g: Graph, cfg: TrainConfig,
                seed: int | None = None) -> ModelParams:
    """Glorot-initialized parameters; deterministic given seed (cfg.seed when
    not passed). The output layer runs one head sized num_classes."""
    if variant not in VARIANTS:
        raise VariantError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    if variant == "gatv3" and g.num_records > cfg.gatv3_edge_budget:
        raise VariantError(
            f"gatv3 supports at most {cfg.gatv3_edge_budget} edge records, "
            f"graph has {g.num_records}")
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    heads_per_layer = tuple([cfg.heads] * (cfg.layers - 1) + [1])
    out_dims = [cfg.hidden_dim] * (cfg.layers - 1) + [g.num_classes]

    W, W2, Wqk = [], [], ([] if variant == "gatv3" else None)
    in_dim = g.feature_dim
    for k in range(cfg.layers):
        rw, rw2, rq = [], [], []
        for _ in range(heads_per_layer[k]):
            rw.append(Tensor(_glorot(rng, (in_dim, out_dims[k])), requires_grad=True))
            rw2.append(Tensor(_glorot(rng, (2 * out_dims[k], 1)), requires_grad=True))
            if variant == "gatv3":
                rq.append(Tensor(_glorot(rng, (in_dim, out_dims[k])), requires_grad=True))
        W.append(rw)
        W2.append(rw2)
        if variant == "gatv3":
            Wqk.append(rq)
        in_dim = heads_per_layer[k] * out_dims[k]
    return ModelParams(variant, cfg.dropout, heads_per_layer, W, W2, Wqk)


@dataclass
class AttentionSnapshot:
    """Pre-dropout attention per layer and head, aligned with the graph's
    record order, plus the representation fed to the output layer."""
    per_layer: list
    head_avg: list
    hidden: np.ndarray

    def checked(self, g: Graph) -> "AttentionSnapshot":
        starts = np.searchsorted(g.dst, np.arange(g.num_nodes))
        for k, heads in enumerate(self.per_layer):
            for t, alpha in enumerate(heads):
                if alpha.min() < 0.0 or alpha.max() > 1.0:
                    raise AssertionError(f"layer {k} head {t}: coefficient outside [0, 1]")
                sums = np.add.reduceat(alpha, starts)
                bad = np.abs(sums - 1.0) > 1e-6
                if np.any(bad):
                    v = int(np.flatnonzero(bad)[0])
                    raise AssertionError(
                        f"layer {k} head {t}: node {v} attention sums to {sums[v]!r}")
        return self


def _gcn_coeff(g: Graph) -> np.ndarray:
    """Symmetric-normalized constant edge weights, 1/sqrt(d_src * d_dst),
    degrees counted over incoming records (self-loops included)."""
    deg = np.bincount(g.dst, minlength=g.num_nodes).astype(np.float64)
    return 1.0 / np.sqrt(deg[g.src] * deg[g.dst])


def _check_self_loops(g: Graph) -> None:
    loops = g.src == g.dst
    if int(np.count_nonzero(loops)) == g.num_nodes:
        return
    have = np.zeros(g.num_nodes, dtype=bool)
    have[g.src[loops]] = True
    raise MissingSelfLoopError(int(np.flatnonzero(~have)[0]))


def forward(params: ModelParams, g: Graph, *, tape: Tape | None = None,
            train_mode: bool = False, rng: np.random.Generator | None = None,
            cache: dict | None = None):
    """Returns (logits tensor, attention snapshot).

    `cache` stores the layer-0 projections X @ W, which stay valid across
    evaluation forwards and across graphs with the same features while the W
    tensors are untouched (they are graph-independent). Never used in
    training mode, where input dropout changes the product.
    """
    tape = Tape() if tape is None else tape
    _check_self_loops(g)
    if train_mode and params.dropout > 0.0 and rng is None:
        raise ConfigError("training-mode forward needs an rng for dropout")

    n = g.num_nodes
    src, dst = g.src, g.dst
    variant = params.variant
    coeff = Tensor(_gcn_coeff(g).reshape(-1, 1)) if variant == "gatv3" else None

    z = Tensor(g.features)
    hidden = g.features
    per_layer, head_avg = [], []
    logits = None
    last_index = len(params.heads_per_layer) - 1

    for k, heads in enumerate(params.heads_per_layer):
        if k == last_index:
            hidden = z.values
        z_in = tape.dropout(z, params.dropout, rng) if train_mode else z
        outs, alphas = [], []
        for t in range(heads):
            cacheable = cache is not None and not train_mode and k == 0
            if cacheable and ("P0", t) in cache:
                p = Tensor(cache[("P0", t)])
            else:
                p = tape.matmul(z_in, params.W[k][t])
                if cacheable:
                    cache[("P0", t)] = p.values
            if variant == "gat":
                pair = tape.concat_cols(tape.gather_rows(p, dst),
                                        tape.gather_rows(p, src))
                e = tape.leaky_relu(tape.matmul(pair, params.W2[k][t]), 0.2)
            elif variant == "gatv2":
                pair = tape.concat_cols(tape.gather_rows(p, dst),
                                        tape.gather_rows(p, src))
                e = tape.matmul(tape.leaky_relu(pair, 0.2), params.W2[k][t])
            else:
                qp = tape.matmul(z_in, params.Wqk[k][t])
                q = tape.segment_weighted_sum(coeff, tape.gather_rows(qp, src),
                                              dst, n)
                pair = tape.concat_cols(tape.gather_rows(q, dst),
                                        tape.gather_rows(q, src))
                e = tape.leaky_relu(tape.matmul(pair, params.W2[k][t]), 0.2)
            alpha = tape.segment_softmax(e, dst, n)
            alphas.append(alpha.values[:, 0].copy())
            a_used = tape.dropout(alpha, params.dropout, rng) if train_mode else alpha
            outs.append(tape.segment_weighted_sum(a_used, tape.gather_rows(p, src),
                                                  dst, n))
        per_layer.append(alphas)
        head_avg.append(np.mean(alphas, axis=0))

        if k == last_index:
            combined = outs[0]
            for o in outs[1:]:
                combined = tape.add(combined, o)
            if heads > 1:
                combined = tape.scale(combined, 1.0 / heads)
            logits = combined
        else:
            cat = outs[0]
            for o in outs[1:]:
                cat = tape.concat_cols(cat, o)
            z = tape.elu(cat)
        layer_out = logits.values if k == last_index else z.values
        if not np.all(np.isfinite(layer_out)):
            raise NonFiniteError(f"layer {k}")

    snapshot = AttentionSnapshot(per_layer, head_avg, hidden)
    if VALIDATE_ATTENTION:
        snapshot.checked(g)
    return logits, snapshot


def accuracy_from_logits(logits: np.ndarray, labels: np.ndarray,
                         idx: np.ndarray) -> float:
    # np.argmax takes the lowest class index on ties
    pred = np.argmax(logits[idx], axis=1)
    return float(np.mean(pred == labels[idx]))


def evaluate(params: ModelParams, g: Graph, idx, *, cache: dict | None = None) -> float:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise EmptyIndexError("evaluation index set is empty")
    logits, _ = forward(params, g, cache=cache)
    return accuracy_from_logits(logits.values, g.labels, idx)


@dataclass(frozen=True)
class TrainRecord:
    best_epoch: int
    val_accuracy: float
    epochs_run: int


def train(params: ModelParams, g: Graph, split, cfg: TrainConfig, *,
          trainable: str = "all", rng: np.random.Generator | None = None,
          max_epochs: int | None = None, cache: dict | None = None):
    """NLL training with validation-accuracy early stopping.

    Returns (parameters of the best validation epoch, record). The passed
    params are mutated by optimization; the returned copy is the best epoch.
    """
    if np.asarray(split.train).size == 0:
        raise EmptyIndexError("train split is empty")
    if np.asarray(split.val).size == 0:
        raise EmptyIndexError("val split is empty")
    epochs = cfg.max_epochs if max_epochs is None else int(max_epochs)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng

    params.set_trainable(trainable)
    opt = Adam(params.trainable_tensors(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    stopper = EarlyStopper(cfg.patience)

    best_params = params.copy()
    best_val = -1.0
    best_epoch = 0
    epochs_run = 0
    for epoch in range(1, epochs + 1):
        epochs_run = epoch
        tape = Tape()
        logits, _ = forward(params, g, tape=tape, train_mode=True, rng=rng)
        loss = tape.nll(tape.log_softmax(logits), g.labels, split.train)
        opt.zero_grad()
        tape.backward(loss)
        opt.step()

        val_acc = evaluate(params, g, split.val, cache=cache)
        if stopper.update(val_acc):
            best_params = params.copy()
            best_val = val_acc
            best_epoch = epoch
        if stopper.should_stop:
            break
    if epochs == 0:
        best_val = evaluate(params, g, split.val, cache=cache)
    return best_params, TrainRecord(best_epoch, best_val, epochs_run)


@dataclass(frozen=True)
class ClusterAttention:
    """First-layer head-averaged attention mass per node, grouped by the
    semantic cluster of the edge source; alpha_self is the self-loop mass."""
    alpha_sc: np.ndarray
    alpha_self: np.ndarray


def cluster_attention_from_snapshot(snap: AttentionSnapshot, g: Graph,
                                    assignment: np.ndarray, num_clusters: int,
                                    layer: int = 0) -> ClusterAttention:
    avg = snap.head_avg[layer]
    loops = g.src == g.dst
    n = g.num_nodes
    alpha_self = np.zeros(n)
    have = np.zeros(n, dtype=bool)
    alpha_self[g.dst[loops]] = avg[loops]
    have[g.dst[loops]] = True
    if not np.all(have):
        raise MissingSelfLoopError(int(np.flatnonzero(~have)[0]))
    alpha_sc = np.zeros((n, num_clusters))
    np.add.at(alpha_sc, (g.dst[~loops], assignment[g.src[~loops]]), avg[~loops])
    return ClusterAttention(alpha_sc=alpha_sc, alpha_self=alpha_self)


def extract_attention(params: ModelParams, g: Graph, sc, layer: int = 0,
                      cache: dict | None = None) -> ClusterAttention:
    """Evaluation-mode forward, then per-cluster attention mass (self-loops
    separated out)."""
    _, snap = forward(params, g, cache=cache)
    return cluster_attention_from_snapshot(snap, g, sc.assignment,
                                           sc.num_clusters, layer)


def node_embeddings(params: ModelParams, g: Graph, *,
                    cache: dict | None = None) -> np.ndarray:
    """Representation feeding the output layer (the post-activation
    concatenation of the last hidden layer's heads)."""
    _, snap = forward(params, g, cache=cache)
    return snap.hidden


def save_params(params: ModelParams, path) -> None:
    """Checkpoint container: `variant` (string), `heads_per_layer` (ints),
    `dropout` (scalar), and per layer k / head t the float64 matrices
    `L{k}H{t}W`, `L{k}H{t}W2`, and for gatv3 `L{k}H{t}Wqk`."""
    arrays = {
        "variant": np.array(params.variant),
        "heads_per_layer": np.array(params.heads_per_layer, dtype=np.int64),
        "dropout": np.array(params.dropout),
    }
    for k, row in enumerate(params.W):
        for t in range(len(row)):
            arrays[f"L{k}H{t}W"] = params.W[k][t].values
            arrays[f"L{k}H{t}W2"] = params.W2[k][t].values
            if params.Wqk is not None:
                arrays[f"L{k}H{t}Wqk"] = params.Wqk[k][t].values
    np.savez(path, **arrays)


def load_params(path) -> ModelParams:
    with np.load(path, allow_pickle=False) as data:
        variant = str(data["variant"][()])
        heads_per_layer = tuple(int(h) for h in data["heads_per_layer"])
        dropout = float(data["dropout"][()])
        W, W2, Wqk = [], [], ([] if variant == "gatv3" else None)
        for k, heads in enumerate(heads_per_layer):
            rw = [Tensor(data[f"L{k}H{t}W"], requires_grad=True) for t in range(heads)]
            rw2 = [Tensor(data[f"L{k}H{t}W2"], requires_grad=True) for t in range(heads)]
            W.append(rw)
            W2.append(rw2)
            if Wqk is not None:
                Wqk.append([Tensor(data[f"L{k}H{t}Wqk"], requires_grad=True)
                            for t in range(heads)])
    return ModelParams(variant, dropout, heads_per_layer, W, W2, Wqk)
