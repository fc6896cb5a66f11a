"""Diagnostics: silhouette coefficient and self-attention change."""

import numpy as np

from .errors import SingleClassError, SizeMismatchError
from .models import ClusterAttention


def silhouette(embeddings: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette over points, Euclidean distances.

    s(i) = (b - a) / max(a, b) with a = mean distance to own-cluster peers
    and b = the smallest mean distance to another cluster. Singletons score
    0, as do points where both means vanish.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != x.shape[0]:
        raise SizeMismatchError(
            f"{labels.shape[0]} labels for {x.shape[0]} points")
    _, dense = np.unique(labels, return_inverse=True)
    k = int(dense.max()) + 1
    if k < 2:
        raise SingleClassError("silhouette needs at least two classes")

    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    dist = np.sqrt(np.maximum(d2, 0.0))

    onehot = np.zeros((x.shape[0], k))
    onehot[np.arange(x.shape[0]), dense] = 1.0
    sums = dist @ onehot
    sizes = onehot.sum(axis=0)

    own = sizes[dense]
    a = np.where(own > 1, sums[np.arange(x.shape[0]), dense] / np.maximum(own - 1, 1), 0.0)
    other = sums / sizes[None, :]
    other[np.arange(x.shape[0]), dense] = np.inf
    b = other.min(axis=1)

    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s = np.where(own > 1, s, 0.0)
    return float(np.mean(s))


def self_attention_delta(before: ClusterAttention, after: ClusterAttention):
    """Per-node change in self-attention and the fraction that increased."""
    if before.alpha_self.shape != after.alpha_self.shape:
        raise SizeMismatchError(
            f"{before.alpha_self.shape} vs {after.alpha_self.shape} nodes")
    delta = after.alpha_self - before.alpha_self
    return delta, float(np.mean(delta > 0.0))
