"""Graph data model and structural statistics.

Edges live in COO form as parallel src/dst arrays, canonically sorted by
(dst, src) so that per-destination segment operations can assume grouped,
ascending destination ids. Undirected graphs store each proper edge as two
directed records and each self-loop once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    InvalidGraphError,
    UndefinedRatioError,
    UnknownLabelError,
)

UNKNOWN_LABEL = -1


@dataclass(frozen=True, eq=False)
class Graph:
    num_nodes: int
    num_classes: int
    src: np.ndarray
    dst: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    undirected: bool

    @property
    def num_records(self) -> int:
        """Directed edge records, counting both directions of undirected edges."""
        return int(self.src.size)

    @property
    def num_self_loops(self) -> int:
        return int(np.count_nonzero(self.src == self.dst))

    @property
    def num_edges(self) -> int:
        """Edges counted once each (an undirected pair is one edge)."""
        if self.undirected:
            return (self.num_records + self.num_self_loops) // 2
        return self.num_records

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and self.num_classes == other.num_classes
            and self.undirected == other.undirected
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.features, other.features)
        )

    def in_neighbors(self, v: int) -> np.ndarray:
        """Sources of edges into v, self-loop excluded."""
        srcs = self.src[self.dst == v]
        return srcs[srcs != v]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def make_graph(num_nodes: int, num_classes: int, src, dst, features, labels,
               undirected: bool, symmetrize: bool = False) -> Graph:
    """Validated Graph constructor.

    With symmetrize=True, missing reverse records of an undirected graph are
    added (self-loops stay single). Records are then canonically ordered and
    all arrays made read-only.
    """
    src = np.asarray(src, dtype=np.int64).reshape(-1)
    dst = np.asarray(dst, dtype=np.int64).reshape(-1)
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)

    if num_nodes < 0 or num_classes < 1:
        raise InvalidGraphError("need num_nodes >= 0 and num_classes >= 1")
    if src.shape != dst.shape:
        raise InvalidGraphError("src and dst must have equal length")
    if features.ndim != 2 or features.shape[0] != num_nodes:
        raise InvalidGraphError(
            f"features must be ({num_nodes}, dim), got {features.shape}")
    if not np.all(np.isfinite(features)):
        raise InvalidGraphError("features contain non-finite entries")
    if labels.shape[0] != num_nodes:
        raise InvalidGraphError("labels length must equal num_nodes")
    known = labels != UNKNOWN_LABEL
    if np.any((labels[known] < 0) | (labels[known] >= num_classes)):
        raise InvalidGraphError("labels out of range")
    if src.size and (src.min() < 0 or src.max() >= num_nodes
                     or dst.min() < 0 or dst.max() >= num_nodes):
        raise InvalidGraphError("edge endpoint out of range")

    keys = src * np.int64(num_nodes) + dst
    if np.unique(keys).size != keys.size:
        raise InvalidGraphError("duplicate edge records")

    if undirected:
        rev = dst * np.int64(num_nodes) + src
        if symmetrize:
            have = set(keys.tolist())
            missing = [(d, s) for s, d, k in zip(src, dst, rev)
                       if s != d and int(k) not in have]
            if missing:
                add_src = np.array([m[0] for m in missing], dtype=np.int64)
                add_dst = np.array([m[1] for m in missing], dtype=np.int64)
                src = np.concatenate([src, add_src])
                dst = np.concatenate([dst, add_dst])
        else:
            if set(keys.tolist()) != set(rev.tolist()):
                raise InvalidGraphError("undirected graph is not symmetric")

    order = np.lexsort((src, dst))
    return Graph(
        num_nodes=int(num_nodes),
        num_classes=int(num_classes),
        src=_freeze(src[order].copy()),
        dst=_freeze(dst[order].copy()),
        features=_freeze(features.copy()),
        labels=_freeze(labels.copy()),
        undirected=bool(undirected),
    )


def add_self_loops(g: Graph) -> Graph:
    """Return g with exactly one (i, i) record per node. Idempotent."""
    has_loop = np.zeros(g.num_nodes, dtype=bool)
    loop_mask = g.src == g.dst
    has_loop[g.src[loop_mask]] = True
    need = np.flatnonzero(~has_loop)
    if need.size == 0:
        return g
    src = np.concatenate([g.src, need])
    dst = np.concatenate([g.dst, need])
    order = np.lexsort((src, dst))
    return Graph(g.num_nodes, g.num_classes, _freeze(src[order]),
                 _freeze(dst[order]), g.features, g.labels, g.undirected)


def strip_self_loops(g: Graph) -> Graph:
    keep = g.src != g.dst
    if np.all(keep):
        return g
    return Graph(g.num_nodes, g.num_classes, _freeze(g.src[keep].copy()),
                 _freeze(g.dst[keep].copy()), g.features, g.labels, g.undirected)


def edge_homophily(g: Graph) -> float:
    """Fraction of edges joining same-label endpoints, self-loops excluded.

    Each undirected edge counts once (the two directed records agree, so the
    ratio over records equals the ratio over edges).
    """
    proper = g.src != g.dst
    if not np.any(proper):
        raise UndefinedRatioError("graph has no proper edges")
    s, d = g.src[proper], g.dst[proper]
    if np.any(g.labels[s] == UNKNOWN_LABEL) or np.any(g.labels[d] == UNKNOWN_LABEL):
        raise UnknownLabelError("edge homophily needs labeled endpoints")
    return float(np.mean(g.labels[s] == g.labels[d]))


@dataclass(frozen=True)
class LNDProfile:
    """Class-wise in-neighbor counts of one node, self-loop excluded."""
    node: int
    classwise: np.ndarray
    degree: int


def lnd_profile(g: Graph, v: int) -> LNDProfile:
    neigh = g.in_neighbors(v)
    lab = g.labels[neigh]
    if np.any(lab == UNKNOWN_LABEL):
        raise UnknownLabelError(f"node {v} has a neighbor with unknown label")
    classwise = np.bincount(lab, minlength=g.num_classes).astype(np.int64)
    return LNDProfile(node=int(v), classwise=_freeze(classwise),
                      degree=int(neigh.size))


def lnd_profiles(g: Graph) -> np.ndarray:
    """All profiles at once: (num_nodes, num_classes) count matrix."""
    proper = g.src != g.dst
    s, d = g.src[proper], g.dst[proper]
    lab = g.labels[s]
    if np.any(lab == UNKNOWN_LABEL):
        raise UnknownLabelError("profile needs labeled neighbors")
    out = np.zeros((g.num_nodes, g.num_classes), dtype=np.int64)
    np.add.at(out, (d, lab), 1)
    return out


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int

    def __post_init__(self):
        _freeze(self.train)
        _freeze(self.val)
        _freeze(self.test)


def make_split(g: Graph, ratios=(0.6, 0.2, 0.2), seed: int = 0) -> Split:
    """Uniform random node partition at the given train/val/test ratios."""
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ConfigError(f"split ratios must be non-negative and sum to 1, got {ratios}")
    n = g.num_nodes
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    n_train = min(n_train, n)
    n_val = min(n_val, n - n_train)
    perm = np.random.default_rng(seed).permutation(n)
    return Split(
        train=np.sort(perm[:n_train]).astype(np.int64),
        val=np.sort(perm[n_train:n_train + n_val]).astype(np.int64),
        test=np.sort(perm[n_train + n_val:]).astype(np.int64),
        seed=int(seed),
    )
