"""Controlled graph interventions for the degree/class-profile pre-experiment.

Three treatments against the untouched control group t0:

  t1  shrink degree, keep class proportions: per node and class keep
      ceil(keep_fraction * count) in-neighbors of that class.
  t2  shrink degree by the same per-node amount as t1, but sample the kept
      in-neighbors blind to class.
  t3  keep degree and class profile exactly: every in-neighbor is replaced
      by a uniformly drawn non-neighbor of the same class.

Self-loops pass through untouched and are never counted as neighbors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UnknownLabelError
from .graph import UNKNOWN_LABEL, Graph, make_graph

TREATMENTS = ("t1", "t2", "t3")


@dataclass(frozen=True)
class TreatmentResult:
    graph: Graph
    # t3 slots where no same-class non-neighbor existed and the original
    # neighbor was kept instead
    warnings: int


def _in_lists(g: Graph):
    """Per-node arrays of in-neighbor sources, self-loops excluded.

    Relies on the canonical (dst, src) record order, so each node's list is
    ascending.
    """
    proper = g.src != g.dst
    s, d = g.src[proper], g.dst[proper]
    counts = np.bincount(d, minlength=g.num_nodes)
    bounds = np.zeros(g.num_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=bounds[1:])
    return [s[bounds[v]:bounds[v + 1]] for v in range(g.num_nodes)]


def _keep_per_class(profile: np.ndarray, keep_fraction: float) -> np.ndarray:
    return np.ceil(keep_fraction * profile).astype(np.int64)


def apply_treatment_detailed(g: Graph, treatment: str, keep_fraction: float = 0.5,
                             seed: int = 0) -> TreatmentResult:
    if treatment not in TREATMENTS:
        raise ConfigError(f"unknown treatment {treatment!r}, expected one of {TREATMENTS}")
    if treatment != "t3" and not 0.0 < keep_fraction <= 1.0:
        raise ConfigError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    if np.any(g.labels == UNKNOWN_LABEL):
        raise UnknownLabelError("treatments need fully labeled nodes")

    rng = np.random.default_rng(seed)
    neigh = _in_lists(g)
    labels = g.labels
    loops = g.src == g.dst
    keep_src = [g.src[loops]]
    keep_dst = [g.dst[loops]]
    warnings = 0

    if treatment == "t3":
        by_class = [np.flatnonzero(labels == c) for c in range(g.num_classes)]
        for v in range(g.num_nodes):
            nv = neigh[v]
            if nv.size == 0:
                continue
            blocked = set(nv.tolist())
            blocked.add(v)
            new_src = np.empty(nv.size, dtype=np.int64)
            for slot, u in enumerate(nv):
                pool = by_class[labels[u]]
                cand = pool[~np.isin(pool, list(blocked), assume_unique=False)]
                if cand.size == 0:
                    new_src[slot] = u
                    warnings += 1
                else:
                    pick = int(cand[rng.integers(cand.size)])
                    new_src[slot] = pick
                    blocked.add(pick)
            keep_src.append(new_src)
            keep_dst.append(np.full(nv.size, v, dtype=np.int64))
        # per-slot replacement keeps every in-profile exactly, which a
        # symmetrized graph could not honor, so the result is directed
        out = make_graph(g.num_nodes, g.num_classes, np.concatenate(keep_src),
                         np.concatenate(keep_dst), g.features, g.labels,
                         undirected=False)
        return TreatmentResult(graph=out, warnings=warnings)

    for v in range(g.num_nodes):
        nv = neigh[v]
        if nv.size == 0:
            continue
        profile = np.bincount(labels[nv], minlength=g.num_classes)
        quota = _keep_per_class(profile, keep_fraction)
        if treatment == "t1":
            kept_parts = []
            for c in np.flatnonzero(quota):
                members = nv[labels[nv] == c]
                kept_parts.append(rng.choice(members, size=int(quota[c]),
                                             replace=False))
            kept = np.concatenate(kept_parts)
        else:  # t2: same kept count as t1, class-blind
            total = int(quota.sum())
            kept = rng.choice(nv, size=total, replace=False)
        keep_src.append(np.sort(kept))
        keep_dst.append(np.full(kept.size, v, dtype=np.int64))

    src = np.concatenate(keep_src)
    dst = np.concatenate(keep_dst)
    if g.undirected:
        # per-node decisions break symmetry; keep an edge if either endpoint
        # kept a direction of it
        key = src * np.int64(g.num_nodes) + dst
        rev_key = dst * np.int64(g.num_nodes) + src
        missing = ~np.isin(rev_key, key)
        src, dst = (np.concatenate([src, dst[missing]]),
                    np.concatenate([dst, src[missing]]))
        out = make_graph(g.num_nodes, g.num_classes, src, dst, g.features,
                         g.labels, undirected=True)
    else:
        out = make_graph(g.num_nodes, g.num_classes, src, dst, g.features,
                         g.labels, undirected=False)
    return TreatmentResult(graph=out, warnings=warnings)


def apply_treatment(g: Graph, treatment: str, keep_fraction: float = 0.5,
                    seed: int = 0) -> Graph:
    return apply_treatment_detailed(g, treatment, keep_fraction, seed).graph
