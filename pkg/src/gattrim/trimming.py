"""Cluster-level do-interventions, total-effect estimation, and trimming.

The causal question, per node i and cluster c: how much self-attention does
i gain when cluster c's incoming influence is switched off? Answered by
comparing two worlds that differ only in that edge removal:

  base        attention refit on the untouched graph
  intervened  attention refit on the graph with cluster c's edges removed

Both start from the same frozen feature transforms and the same scoring
re-initialization, train with the same dropout stream, and are read out the
same way, so the intervention is the only varying cause. The per-node
difference in self-attention is the total effect; trimming then keeps, for
every node, only the in-edges from its least (or most) distracting cluster.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .clustering import (
    SemanticClustering,
    kmeans_pp,
    mlp_pseudolabels,
    random_clusters,
    supervised_clusters,
)
from .errors import ClusterRangeError, ConfigError, SizeMismatchError
from .graph import Graph, add_self_loops, make_graph
from .models import (
    ClusterAttention,
    ModelParams,
    TrainConfig,
    build_model,
    extract_attention,
    train,
)
from .seeding import derive_seed

RETAINED_NONE = -1
TRIM_MODES = ("low_distraction", "high_distraction")
CLUSTER_MODES = ("unsup", "semi", "sup", "random")


@dataclass(frozen=True)
class TotalEffectTable:
    """te_self[i, c]: change in node i's self-attention when cluster c is
    switched off and the attention is refit. present_mask flags clusters
    with at least one non-self in-neighbor; other entries are never used."""
    te_self: np.ndarray
    present_mask: np.ndarray


@dataclass(frozen=True)
class TrimmedGraph:
    graph: Graph
    # retained cluster per node; RETAINED_NONE when no cluster was eligible
    retained_cluster: np.ndarray


def cluster_presence(g: Graph, assignment: np.ndarray, k: int) -> np.ndarray:
    if assignment.shape[0] != g.num_nodes:
        raise SizeMismatchError(
            f"{assignment.shape[0]} assignments for {g.num_nodes} nodes")
    proper = g.src != g.dst
    mask = np.zeros((g.num_nodes, k), dtype=bool)
    mask[g.dst[proper], assignment[g.src[proper]]] = True
    return mask


def intervene_cluster(g: Graph, sc: SemanticClustering, c: int) -> Graph:
    """Remove the influence of cluster c: every non-self edge sourced in c
    disappears; on undirected graphs the whole pair goes (either endpoint in
    c), keeping the record set symmetric. Self-loops always survive.
    Intervening on an empty cluster returns the graph unchanged."""
    if not 0 <= c < sc.num_clusters:
        raise ClusterRangeError(c, sc.num_clusters)
    assignment = sc.assignment
    if assignment.shape[0] != g.num_nodes:
        raise SizeMismatchError(
            f"{assignment.shape[0]} assignments for {g.num_nodes} nodes")
    if not np.any(assignment == c):
        return g
    loops = g.src == g.dst
    if g.undirected:
        drop = (assignment[g.src] == c) | (assignment[g.dst] == c)
    else:
        drop = assignment[g.src] == c
    keep = loops | ~drop
    return make_graph(g.num_nodes, g.num_classes, g.src[keep], g.dst[keep],
                      g.features, g.labels, g.undirected)


def finetune_attention(params: ModelParams, g_intervened: Graph, split,
                       cfg: TrainConfig, *, reinit_seed: int | None = None,
                       rng: np.random.Generator | None = None,
                       epochs: int | None = None, cache: dict | None = None):
    """Refit the scoring parameters on an intervened graph.

    The feature transforms W stay bit-identical; W2 (and the gatv3 Q/K
    projection) are redrawn from reinit_seed, then trained under the usual
    protocol for the fine-tuning budget (cfg.finetune_max_epochs, falling
    back to cfg.max_epochs). Returns (refit params, train record)."""
    if epochs is None:
        epochs = (cfg.max_epochs if cfg.finetune_max_epochs is None
                  else cfg.finetune_max_epochs)
    world = params.copy()
    world.reinit_attention(cfg.seed if reinit_seed is None else reinit_seed)
    if epochs == 0:
        world.set_trainable("attention")
        return world, None
    return train(world, g_intervened, split, cfg, trainable="attention",
                 rng=rng, max_epochs=epochs, cache=cache)


def total_effect(base: ClusterAttention, intervened: ClusterAttention) -> np.ndarray:
    """One column of the table: intervened minus base self-attention."""
    if base.alpha_self.shape != intervened.alpha_self.shape:
        raise SizeMismatchError(
            f"{base.alpha_self.shape} vs {intervened.alpha_self.shape} nodes")
    return intervened.alpha_self - base.alpha_self


def trim_graph(g: Graph, sc: SemanticClustering, te: TotalEffectTable,
               mode: str = "low_distraction") -> TrimmedGraph:
    """Keep, per node, only in-edges from one cluster: the argmin of the
    node's usable TE row (low_distraction) or the argmax (high_distraction),
    ties to the lowest cluster index. Nodes with no usable cluster keep only
    their self-loop. Per-node selection breaks symmetry, so the result is a
    directed graph."""
    if mode not in TRIM_MODES:
        raise ConfigError(f"unknown trim mode {mode!r}, expected one of {TRIM_MODES}")
    n, k = g.num_nodes, sc.num_clusters
    if te.te_self.shape != (n, k) or te.present_mask.shape != (n, k):
        raise SizeMismatchError(
            f"TE table {te.te_self.shape} does not match graph/clustering ({n}, {k})")

    scores = te.te_self.copy()
    if mode == "low_distraction":
        scores[~te.present_mask] = np.inf
        retained = np.argmin(scores, axis=1).astype(np.int64)
    else:
        scores[~te.present_mask] = -np.inf
        retained = np.argmax(scores, axis=1).astype(np.int64)
    retained[~te.present_mask.any(axis=1)] = RETAINED_NONE

    loops = g.src == g.dst
    keep = loops | (sc.assignment[g.src] == retained[g.dst])
    trimmed = make_graph(g.num_nodes, g.num_classes, g.src[keep], g.dst[keep],
                         g.features, g.labels, undirected=False)
    return TrimmedGraph(graph=trimmed, retained_cluster=retained)


def make_clustering(g: Graph, split, cfg: TrainConfig, cluster_mode: str,
                    seed: int) -> SemanticClustering:
    """The pipeline's clustering stage: k = the graph's class count."""
    if cluster_mode == "unsup":
        return kmeans_pp(g.features, g.num_classes, seed=seed,
                         normalize=cfg.kmeans_normalize)
    if cluster_mode == "semi":
        return mlp_pseudolabels(g.features, g.labels, split,
                                replace(cfg, seed=seed),
                                num_classes=g.num_classes)
    if cluster_mode == "sup":
        return supervised_clusters(g.labels, num_classes=g.num_classes)
    if cluster_mode == "random":
        return random_clusters(g.num_nodes, g.num_classes, seed=seed)
    raise ConfigError(
        f"unknown cluster mode {cluster_mode!r}, expected one of {CLUSTER_MODES}")


TE_SENTINEL = "NA"


def save_te_table(te: TotalEffectTable, path) -> None:
    """node_id, then one TE column per cluster; absent clusters write the
    sentinel instead of a number."""
    lines = []
    for i in range(te.te_self.shape[0]):
        cells = [repr(float(v)) if ok else TE_SENTINEL
                 for v, ok in zip(te.te_self[i], te.present_mask[i])]
        lines.append("\t".join([str(i)] + cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def save_retained(trimmed: TrimmedGraph, path) -> None:
    lines = [f"{i}\t{int(c)}" for i, c in enumerate(trimmed.retained_cluster)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class PipelineReport:
    clustering: SemanticClustering
    pretrained: ModelParams
    pretrain_record: object
    base_params: ModelParams
    base_attention: ClusterAttention
    intervened_attention: list
    finetune_records: list
    te: TotalEffectTable
    trimmed: TrimmedGraph
    timings: dict


def run_trim_pipeline(g: Graph, split, cfg: TrainConfig, variant: str = "gat",
                      cluster_mode: str = "sup",
                      trim_mode: str = "low_distraction", *,
                      pretrained: ModelParams | None = None,
                      clustering: SemanticClustering | None = None,
                      finetune_epochs: int | None = None) -> PipelineReport:
    """Cluster, pretrain, estimate per-cluster total effects, and trim.

    `pretrained` and `clustering` short-circuit their stages (ablations reuse
    one pretraining across trim modes). All randomness derives from cfg.seed:
    distinct streams for clustering, initialization, scoring re-init, and the
    dropout of each fine-tuning world (the same stream per world, so worlds
    differ only in the intervention).
    """
    timings: dict = {}
    g_model = add_self_loops(g)

    t0 = time.perf_counter()
    if clustering is None:
        clustering = make_clustering(g_model, split, cfg, cluster_mode,
                                     derive_seed(cfg.seed, "cluster"))
    timings["cluster"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if pretrained is None:
        params = build_model(variant, g_model, cfg,
                             seed=derive_seed(cfg.seed, "init"))
        pretrained, pretrain_record = train(
            params, g_model, split, cfg,
            rng=np.random.default_rng(derive_seed(cfg.seed, "pretrain")))
    else:
        pretrain_record = None
    timings["pretrain"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    k = clustering.num_clusters
    reinit_seed = derive_seed(cfg.seed, "reinit")
    finetune_seed = derive_seed(cfg.seed, "finetune")
    cache: dict = {}

    base_params, base_record = finetune_attention(
        pretrained, g_model, split, cfg, reinit_seed=reinit_seed,
        rng=np.random.default_rng(finetune_seed), epochs=finetune_epochs,
        cache=cache)
    base_attention = extract_attention(base_params, g_model, clustering,
                                       layer=cfg.attention_layer, cache=cache)

    te_self = np.zeros((g_model.num_nodes, k))
    intervened_attention: list = [None] * k
    finetune_records: list = [base_record] + [None] * k
    sizes = np.bincount(clustering.assignment, minlength=k)
    for c in range(k):
        if sizes[c] == 0:
            # identical world: the refit is deterministic, so the column is
            # exactly zero without recomputing
            continue
        g_c = intervene_cluster(g_model, clustering, c)
        world_params, rec = finetune_attention(
            pretrained, g_c, split, cfg, reinit_seed=reinit_seed,
            rng=np.random.default_rng(finetune_seed), epochs=finetune_epochs,
            cache=cache)
        ca = extract_attention(world_params, g_c, clustering,
                               layer=cfg.attention_layer, cache=cache)
        intervened_attention[c] = ca
        finetune_records[1 + c] = rec
        te_self[:, c] = total_effect(base_attention, ca)
    timings["interventions"] = time.perf_counter() - t0

    te = TotalEffectTable(
        te_self=te_self,
        present_mask=cluster_presence(g_model, clustering.assignment, k))

    t0 = time.perf_counter()
    trimmed = trim_graph(g_model, clustering, te, trim_mode)
    timings["trim"] = time.perf_counter() - t0

    return PipelineReport(
        clustering=clustering, pretrained=pretrained,
        pretrain_record=pretrain_record, base_params=base_params,
        base_attention=base_attention,
        intervened_attention=intervened_attention,
        finetune_records=finetune_records, te=te, trimmed=trimmed,
        timings=timings)
