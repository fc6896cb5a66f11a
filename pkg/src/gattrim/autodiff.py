"""Minimal reverse-mode automatic differentiation over dense 2-D float64
arrays, with the edge-segment operations attention networks need.

A Tape records primitive applications in execution order; backward() replays
the records in reverse, accumulating gradients into every tensor reachable
from the loss that has requires_grad set. Per-edge quantities live in COO
form (parallel src/dst index arrays); nothing ever materializes an N x N
attention matrix.

All values are float64. Dropout takes an explicit numpy Generator, so a run
is fully determined by its seeds.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptySegmentError, NonScalarLossError, ShapeMismatchError

# Flipped on by the test suite: validates finiteness of every op output.
CHECK_FINITE = False


class Tensor:
    """A 2-D float64 value with an optional gradient of the same shape."""

    __slots__ = ("values", "requires_grad", "grad")

    def __init__(self, values, requires_grad: bool = False):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        elif arr.ndim != 2:
            raise ShapeMismatchError("tensor", arr.shape, "(rows, cols)")
        self.values = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.values.shape

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, requires_grad={self.requires_grad})"


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.values)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    if g.shape == tuple(shape):
        return g
    out = g
    if shape[0] == 1 and out.shape[0] != 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and out.shape[1] != 1:
        out = out.sum(axis=1, keepdims=True)
    return out


def _segment_starts(seg: np.ndarray, num_segments: int, op: str) -> np.ndarray:
    """Row offsets of each segment for a sorted segment-id vector."""
    counts = np.bincount(seg, minlength=num_segments)
    if len(counts) > num_segments:
        raise ShapeMismatchError(op, (int(seg.max()) + 1,), (num_segments,))
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise EmptySegmentError(int(empty[0]))
    starts = np.zeros(num_segments, dtype=np.int64)
    np.cumsum(counts[:-1], out=starts[1:])
    return starts


class Tape:
    """Ordered record of primitive applications (a Wengert list)."""

    def __init__(self):
        self._nodes: list[tuple[Tensor, object]] = []

    # ------------------------------------------------------------- recording

    def _out(self, values, inputs, fn) -> Tensor:
        needs = any(t.requires_grad for t in inputs)
        out = Tensor(values, requires_grad=needs)
        if CHECK_FINITE and not np.all(np.isfinite(out.values)):
            raise FloatingPointError("non-finite value produced on tape")
        if needs:
            self._nodes.append((out, fn))
        return out

    # ------------------------------------------------------------ primitives

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.values.shape[1] != b.values.shape[0]:
            raise ShapeMismatchError("matmul", a.values.shape, b.values.shape)

        def fn(g):
            if a.requires_grad:
                _accumulate(a, g @ b.values.T)
            if b.requires_grad:
                _accumulate(b, a.values.T @ g)

        return self._out(a.values @ b.values, (a, b), fn)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        try:
            values = a.values + b.values
        except ValueError:
            raise ShapeMismatchError("add", a.values.shape, b.values.shape)

        def fn(g):
            if a.requires_grad:
                _accumulate(a, _unbroadcast(g, a.values.shape))
            if b.requires_grad:
                _accumulate(b, _unbroadcast(g, b.values.shape))

        return self._out(values, (a, b), fn)

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        try:
            values = a.values * b.values
        except ValueError:
            raise ShapeMismatchError("mul", a.values.shape, b.values.shape)

        def fn(g):
            if a.requires_grad:
                _accumulate(a, _unbroadcast(g * b.values, a.values.shape))
            if b.requires_grad:
                _accumulate(b, _unbroadcast(g * a.values, b.values.shape))

        return self._out(values, (a, b), fn)

    def scale(self, a: Tensor, s: float) -> Tensor:
        def fn(g):
            if a.requires_grad:
                _accumulate(a, g * s)

        return self._out(a.values * s, (a,), fn)

    def leaky_relu(self, x: Tensor, slope: float) -> Tensor:
        pos = x.values > 0.0
        values = np.where(pos, x.values, slope * x.values)

        def fn(g):
            if x.requires_grad:
                _accumulate(x, np.where(pos, g, slope * g))

        return self._out(values, (x,), fn)

    def elu(self, x: Tensor, alpha: float = 1.0) -> Tensor:
        pos = x.values > 0.0
        expm1 = alpha * np.expm1(np.minimum(x.values, 0.0))
        values = np.where(pos, x.values, expm1)

        def fn(g):
            if x.requires_grad:
                _accumulate(x, np.where(pos, g, g * (expm1 + alpha)))

        return self._out(values, (x,), fn)

    def concat_cols(self, a: Tensor, b: Tensor) -> Tensor:
        if a.values.shape[0] != b.values.shape[0]:
            raise ShapeMismatchError("concat_cols", a.values.shape, b.values.shape)
        na = a.values.shape[1]

        def fn(g):
            if a.requires_grad:
                _accumulate(a, g[:, :na])
            if b.requires_grad:
                _accumulate(b, g[:, na:])

        return self._out(np.concatenate([a.values, b.values], axis=1), (a, b), fn)

    def gather_rows(self, x: Tensor, idx: np.ndarray) -> Tensor:
        idx = np.asarray(idx, dtype=np.int64)

        def fn(g):
            if x.requires_grad:
                acc = np.zeros_like(x.values)
                np.add.at(acc, idx, g)
                _accumulate(x, acc)

        return self._out(x.values[idx], (x,), fn)

    def segment_softmax(self, x: Tensor, seg: np.ndarray, num_segments: int) -> Tensor:
        """Normalize a per-edge column vector over groups sharing a
        destination node. `seg` must be sorted ascending and cover every
        segment in [0, num_segments); stabilized by per-segment max
        subtraction."""
        if x.values.shape[1] != 1:
            raise ShapeMismatchError("segment_softmax", x.values.shape, "(edges, 1)")
        seg = np.asarray(seg, dtype=np.int64)
        if seg.shape[0] != x.values.shape[0]:
            raise ShapeMismatchError("segment_softmax", x.values.shape, seg.shape)
        starts = _segment_starts(seg, num_segments, "segment_softmax")
        flat = x.values[:, 0]
        seg_max = np.maximum.reduceat(flat, starts)
        e = np.exp(flat - seg_max[seg])
        denom = np.add.reduceat(e, starts)
        y = (e / denom[seg]).reshape(-1, 1)

        def fn(g):
            if x.requires_grad:
                prod = y * g
                inner = np.add.reduceat(prod[:, 0], starts)
                _accumulate(x, prod - y * inner[seg].reshape(-1, 1))

        return self._out(y, (x,), fn)

    def segment_weighted_sum(self, w: Tensor, v: Tensor, seg: np.ndarray,
                             num_segments: int) -> Tensor:
        """out[s] = sum over rows e with seg[e]==s of w[e] * v[e].
        `w` is (edges, 1), `v` is (edges, width), `seg` sorted ascending."""
        if w.values.shape[1] != 1 or w.values.shape[0] != v.values.shape[0]:
            raise ShapeMismatchError("segment_weighted_sum", w.values.shape, v.values.shape)
        seg = np.asarray(seg, dtype=np.int64)
        weighted = w.values * v.values
        counts = np.bincount(seg, minlength=num_segments)
        if len(counts) > num_segments:
            raise ShapeMismatchError("segment_weighted_sum", (int(seg.max()) + 1,), (num_segments,))
        if np.all(counts > 0):
            starts = np.zeros(num_segments, dtype=np.int64)
            np.cumsum(counts[:-1], out=starts[1:])
            values = np.add.reduceat(weighted, starts, axis=0)
        else:
            # empty segments sum to zero rows; reduceat cannot express that
            values = np.zeros((num_segments, v.values.shape[1]))
            np.add.at(values, seg, weighted)

        def fn(g):
            g_rows = g[seg]
            if w.requires_grad:
                _accumulate(w, np.sum(g_rows * v.values, axis=1, keepdims=True))
            if v.requires_grad:
                _accumulate(v, g_rows * w.values)

        return self._out(values, (w, v), fn)

    def log_softmax(self, x: Tensor) -> Tensor:
        shifted = x.values - x.values.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        y = shifted - lse

        def fn(g):
            if x.requires_grad:
                _accumulate(x, g - np.exp(y) * g.sum(axis=1, keepdims=True))

        return self._out(y, (x,), fn)

    def nll(self, logp: Tensor, labels: np.ndarray, idx: np.ndarray) -> Tensor:
        """Mean negative log-likelihood of `labels[idx]` under row
        log-probabilities `logp[idx]`. Returns a (1, 1) tensor."""
        idx = np.asarray(idx, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if idx.size == 0:
            raise ShapeMismatchError("nll", (0,), "non-empty index set")
        picked = logp.values[idx, labels[idx]]
        value = -picked.mean()

        def fn(g):
            if logp.requires_grad:
                acc = np.zeros_like(logp.values)
                np.subtract.at(acc, (idx, labels[idx]), g[0, 0] / idx.size)
                _accumulate(logp, acc)

        return self._out(np.array([[value]]), (logp,), fn)

    def dropout(self, x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
        """Inverted dropout: zero entries with probability `rate`, scale the
        survivors by 1/(1-rate). rate=0 is the identity."""
        if not 0.0 <= rate < 1.0:
            raise ShapeMismatchError("dropout", (rate,), "rate in [0, 1)")
        if rate == 0.0:
            return x
        keep = (rng.random(x.values.shape) >= rate) / (1.0 - rate)

        def fn(g):
            if x.requires_grad:
                _accumulate(x, g * keep)

        return self._out(x.values * keep, (x,), fn)

    def sum_all(self, x: Tensor) -> Tensor:
        def fn(g):
            if x.requires_grad:
                _accumulate(x, np.full_like(x.values, g[0, 0]))

        return self._out(np.array([[x.values.sum()]]), (x,), fn)

    # -------------------------------------------------------------- backward

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/dt into t.grad for every tensor on this tape
        with requires_grad, and into the leaf tensors feeding it."""
        if loss.values.shape != (1, 1):
            raise NonScalarLossError(loss.values.shape)
        _accumulate(loss, np.ones((1, 1)))
        for out, fn in reversed(self._nodes):
            if out.grad is None:
                continue
            fn(out.grad)


def grad_check(f, x: Tensor, step: float = 1e-4) -> float:
    """Compare the tape gradient of scalar-valued `f` at `x` against central
    finite differences, entry by entry.

    `f` takes (tape, tensor) and returns a (1, 1) tensor built on that tape.
    Returns the maximum relative error, with an absolute floor of 1e-2 in
    the denominator so near-zero entries are compared absolutely.
    """
    probe = Tensor(x.values.copy(), requires_grad=True)
    tape = Tape()
    loss = f(tape, probe)
    tape.backward(loss)
    analytic = np.zeros_like(probe.values) if probe.grad is None else probe.grad.copy()

    numeric = np.zeros_like(probe.values)
    flat = probe.values.reshape(-1)
    num_flat = numeric.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + step
        hi = f(Tape(), probe).values[0, 0]
        flat[k] = orig - step
        lo = f(Tape(), probe).values[0, 0]
        flat[k] = orig
        num_flat[k] = (hi - lo) / (2.0 * step)

    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-2)
    return float(np.max(np.abs(analytic - numeric) / scale))
