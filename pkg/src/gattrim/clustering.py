"""Node grouping for cluster-level attention accounting.

Three ways to produce the groups, mirroring how much label information is
available: k-means++ on features (none), a two-layer perceptron's
pseudo-labels (train/val labels only), or the ground-truth labels. A uniform
random assignment is included as an ablation baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, Tensor
from .errors import (
    ClusterCountError,
    ConfigError,
    EmptyClusterError,
    EmptyIndexError,
    LengthMismatchError,
    UnknownLabelError,
)
from .graph import UNKNOWN_LABEL
from .models import TrainConfig, accuracy_from_logits
from .optim import Adam, EarlyStopper


@dataclass(frozen=True)
class SemanticClustering:
    assignment: np.ndarray
    num_clusters: int
    centers: np.ndarray | None
    mode: str


def cluster_centers(features: np.ndarray, assignment: np.ndarray,
                    num_clusters: int | None = None) -> np.ndarray:
    """Coordinate-wise mean of each cluster's rows."""
    features = np.asarray(features, dtype=np.float64)
    assignment = np.asarray(assignment, dtype=np.int64)
    if features.shape[0] != assignment.shape[0]:
        raise LengthMismatchError(
            f"{features.shape[0]} feature rows vs {assignment.shape[0]} assignments")
    k = int(assignment.max()) + 1 if num_clusters is None else int(num_clusters)
    counts = np.bincount(assignment, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise EmptyClusterError(int(empty[0]))
    sums = np.zeros((k, features.shape[1]))
    np.add.at(sums, assignment, features)
    return sums / counts[:, None]


def _pairwise_sq_dist(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    xx = np.sum(x * x, axis=1, keepdims=True)
    cc = np.sum(centers * centers, axis=1)
    return np.maximum(xx - 2.0 * (x @ centers.T) + cc, 0.0)


def kmeans_pp(features: np.ndarray, k: int, seed: int, max_iters: int = 100,
              normalize: str = "raw",
              objective_out: list | None = None) -> SemanticClustering:
    """k-means++ seeding followed by Lloyd iterations to an assignment
    fixpoint.

    Empty clusters are re-seeded from the point farthest from its own
    center. When objective_out is a list, the within-cluster sum of squared
    distances after each assignment step is appended to it.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ClusterCountError(f"features must be 2-D, got shape {x.shape}")
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ClusterCountError(f"need 1 <= k <= {n}, got k={k}")
    if normalize not in ("raw", "l2"):
        raise ConfigError("normalize must be 'raw' or 'l2'")
    if normalize == "l2":
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        x = x / np.where(norms == 0.0, 1.0, norms)  # zero rows stay zero

    rng = np.random.default_rng(seed)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    for c in range(1, k):
        d2 = _pairwise_sq_dist(x, centers[:c]).min(axis=1)
        total = d2.sum()
        if total == 0.0:
            centers[c] = x[rng.integers(n)]
        else:
            centers[c] = x[rng.choice(n, p=d2 / total)]

    assignment = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iters):
        d2 = _pairwise_sq_dist(x, centers)
        new_assignment = np.argmin(d2, axis=1).astype(np.int64)

        counts = np.bincount(new_assignment, minlength=k)
        while np.any(counts == 0):
            c = int(np.flatnonzero(counts == 0)[0])
            own = d2[np.arange(n), new_assignment].copy()
            own[counts[new_assignment] <= 1] = -1.0  # keep donors non-empty
            far = int(np.argmax(own))
            counts[new_assignment[far]] -= 1
            new_assignment[far] = c
            counts[c] += 1
            centers[c] = x[far]
            d2[:, c] = _pairwise_sq_dist(x, centers[c:c + 1])[:, 0]

        if objective_out is not None:
            objective_out.append(float(d2[np.arange(n), new_assignment].sum()))
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        sums = np.zeros_like(centers)
        np.add.at(sums, assignment, x)
        centers = sums / np.bincount(assignment, minlength=k)[:, None]

    centers = cluster_centers(x, assignment, k)
    return SemanticClustering(assignment=assignment, num_clusters=k,
                              centers=centers, mode="unsup")


def mlp_pseudolabels(features: np.ndarray, labels: np.ndarray, split,
                     cfg: TrainConfig,
                     num_classes: int | None = None) -> SemanticClustering:
    """Two-layer perceptron trained on the split's train nodes, early-stopped
    on val accuracy; every node gets its predicted class, except train nodes
    which keep their true label."""
    x = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    train, val = np.asarray(split.train), np.asarray(split.val)
    if train.size == 0:
        raise EmptyIndexError("pseudo-labeling needs a non-empty train split")
    if val.size == 0:
        raise EmptyIndexError("pseudo-labeling needs a non-empty val split")
    if np.any(labels[train] == UNKNOWN_LABEL) or np.any(labels[val] == UNKNOWN_LABEL):
        raise UnknownLabelError("train and val nodes must be labeled")
    known = labels != UNKNOWN_LABEL
    c = int(labels[known].max()) + 1 if num_classes is None else int(num_classes)

    rng = np.random.default_rng(cfg.seed)
    limit1 = np.sqrt(6.0 / (x.shape[1] + cfg.hidden_dim))
    limit2 = np.sqrt(6.0 / (cfg.hidden_dim + c))
    w1 = Tensor(rng.uniform(-limit1, limit1, (x.shape[1], cfg.hidden_dim)),
                requires_grad=True)
    b1 = Tensor(np.zeros((1, cfg.hidden_dim)), requires_grad=True)
    w2 = Tensor(rng.uniform(-limit2, limit2, (cfg.hidden_dim, c)),
                requires_grad=True)
    b2 = Tensor(np.zeros((1, c)), requires_grad=True)
    xt = Tensor(x)

    def logits_of(tape: Tape) -> Tensor:
        h = tape.leaky_relu(tape.add(tape.matmul(xt, w1), b1), 0.0)
        return tape.add(tape.matmul(h, w2), b2)

    opt = Adam([w1, b1, w2, b2], lr=cfg.lr, weight_decay=cfg.weight_decay)
    stopper = EarlyStopper(cfg.patience)
    best = [t.values.copy() for t in (w1, b1, w2, b2)]
    for _ in range(cfg.max_epochs):
        tape = Tape()
        loss = tape.nll(tape.log_softmax(logits_of(tape)), labels, train)
        opt.zero_grad()
        tape.backward(loss)
        opt.step()
        val_acc = accuracy_from_logits(logits_of(Tape()).values, labels, val)
        if stopper.update(val_acc):
            best = [t.values.copy() for t in (w1, b1, w2, b2)]
        if stopper.should_stop:
            break
    for t, v in zip((w1, b1, w2, b2), best):
        t.values[...] = v

    assignment = np.argmax(logits_of(Tape()).values, axis=1).astype(np.int64)
    assignment[train] = labels[train]
    counts = np.bincount(assignment, minlength=c)
    centers = cluster_centers(x, assignment, c) if np.all(counts > 0) else None
    return SemanticClustering(assignment=assignment, num_clusters=c,
                              centers=centers, mode="semi")


def supervised_clusters(labels: np.ndarray,
                        num_classes: int | None = None) -> SemanticClustering:
    labels = np.asarray(labels, dtype=np.int64)
    if np.any(labels == UNKNOWN_LABEL):
        raise UnknownLabelError("supervised clustering needs every label")
    c = int(labels.max()) + 1 if num_classes is None else int(num_classes)
    return SemanticClustering(assignment=labels.copy(), num_clusters=c,
                              centers=None, mode="sup")


def random_clusters(num_nodes: int, k: int, seed: int) -> SemanticClustering:
    """Uniform random assignment; ablation baseline, no semantics."""
    if k < 1:
        raise ClusterCountError(f"need k >= 1, got {k}")
    rng = np.random.default_rng(seed)
    assignment = rng.integers(0, k, size=num_nodes).astype(np.int64)
    return SemanticClustering(assignment=assignment, num_clusters=int(k),
                              centers=None, mode="random")


def adjusted_rand_index(a, b) -> float:
    """Pair-counting ARI; 1.0 for identical partitions up to relabeling."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatchError(
            f"assignments must be equal-length vectors, got {a.shape} and {b.shape}")
    n = a.shape[0]
    if n < 2:
        return 1.0

    def comb2(v):
        return v * (v - 1) / 2.0

    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)
    sum_cells = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    expected = sum_rows * sum_cols / comb2(n)
    maximum = 0.5 * (sum_rows + sum_cols)
    if maximum == expected:
        return 1.0
    return float((sum_cells - expected) / (maximum - expected))


def save_clusters(sc: SemanticClustering, path) -> None:
    """One `node_id TAB cluster_id` line per node."""
    lines = [f"{i}\t{int(c)}" for i, c in enumerate(sc.assignment)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def aggregate_center_distance(neighbor_reprs: np.ndarray,
                              neighbor_weights: np.ndarray,
                              own_repr: np.ndarray, center: np.ndarray,
                              self_weight: float) -> float:
    """Distance from the attention-style aggregate to the cluster center.

    The aggregate gives `self_weight` to the node's own representation and
    spreads the remaining mass over the neighbors in proportion to
    `neighbor_weights`.
    """
    w = np.asarray(neighbor_weights, dtype=np.float64)
    if w.sum() <= 0:
        raise ConfigError("neighbor weights must have positive mass")
    mix = (w / w.sum()) @ np.asarray(neighbor_reprs, dtype=np.float64)
    h = self_weight * np.asarray(own_repr, dtype=np.float64) + (1.0 - self_weight) * mix
    return float(np.linalg.norm(h - np.asarray(center, dtype=np.float64)))
