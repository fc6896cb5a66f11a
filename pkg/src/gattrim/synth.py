"""Synthetic heterophilic graph generator.

Features come from class-conditional unit-variance Gaussians whose centers
sit a configurable distance apart, so cluster centers are known analytically.
Edges are sampled to hit a target edge homophily: the intra-class edge count
is fixed up front and distinct pairs are drawn by rejection.
"""

from __future__ import annotations

import numpy as np

from .errors import InfeasibleGraphError
from .graph import Graph, make_graph


def _class_centers(num_classes: int, feature_dim: int, separation: float,
                   rng: np.random.Generator) -> np.ndarray:
    raw = rng.normal(size=(feature_dim, num_classes))
    if feature_dim >= num_classes:
        q, _ = np.linalg.qr(raw)
        # orthonormal columns sit sqrt(2) apart; rescale to the requested gap
        return q[:, :num_classes].T * (separation / np.sqrt(2.0))
    centers = raw.T
    norms = np.linalg.norm(centers, axis=1, keepdims=True)
    return centers / norms * separation


def _draw_pairs(labels: np.ndarray, count: int, want_same: bool, taken: set,
                rng: np.random.Generator) -> None:
    n = labels.shape[0]
    placed = 0
    attempts = 0
    limit = 400 * max(count, 1) + 2000
    while placed < count:
        attempts += 1
        if attempts > limit:
            raise InfeasibleGraphError(
                "could not place requested edges without duplicates")
        a = int(rng.integers(n))
        b = int(rng.integers(n))
        if a == b or (labels[a] == labels[b]) != want_same:
            continue
        pair = (a, b) if a < b else (b, a)
        if pair in taken:
            continue
        taken.add(pair)
        placed += 1


def generate_synthetic(num_nodes: int, num_classes: int, feature_dim: int,
                       target_homophily: float, avg_degree: float,
                       class_separation: float, seed: int) -> Graph:
    """Undirected graph with edge homophily within 0.05 of target.

    Deterministic given seed. Labels are balanced up to remainder; no
    self-loops are included.
    """
    if not 0.0 <= target_homophily <= 1.0:
        raise InfeasibleGraphError(
            f"target_homophily must be in [0, 1], got {target_homophily}")
    if avg_degree < 1.0:
        raise InfeasibleGraphError(f"avg_degree must be >= 1, got {avg_degree}")
    if avg_degree > num_nodes - 1:
        raise InfeasibleGraphError(
            f"avg_degree {avg_degree} exceeds {num_nodes - 1} possible neighbors")

    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(num_nodes, dtype=np.int64) % num_classes)
    class_sizes = np.bincount(labels, minlength=num_classes)

    centers = _class_centers(num_classes, feature_dim, class_separation, rng)
    features = centers[labels] + rng.normal(size=(num_nodes, feature_dim))

    num_edges = int(round(avg_degree * num_nodes / 2.0))
    num_intra = int(round(target_homophily * num_edges))
    intra_capacity = int((class_sizes * (class_sizes - 1) // 2).sum())
    total_capacity = num_nodes * (num_nodes - 1) // 2
    if num_intra > intra_capacity:
        raise InfeasibleGraphError(
            f"need {num_intra} intra-class edges, only {intra_capacity} pairs exist")
    if num_edges - num_intra > total_capacity - intra_capacity:
        raise InfeasibleGraphError("not enough cross-class pairs for requested edges")

    taken: set = set()
    _draw_pairs(labels, num_intra, True, taken, rng)
    _draw_pairs(labels, num_edges - num_intra, False, taken, rng)

    pairs = sorted(taken)
    src = np.array([p[0] for p in pairs], dtype=np.int64)
    dst = np.array([p[1] for p in pairs], dtype=np.int64)
    return make_graph(num_nodes, num_classes, src, dst, features, labels,
                      undirected=True, symmetrize=True)
