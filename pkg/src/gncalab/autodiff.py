"""Reverse-mode autodiff over dense float64 arrays.

A small fixed vocabulary of operations, each recording one node on an
explicit tape. Forward values are plain numpy arrays; backward rules are
closures stored on the node. The tape is rebuilt every forward pass (no
retained graphs), visits each node exactly once in reverse recording order,
and accumulates gradients by summation so shared subexpressions are handled
correctly. Every op checks its output for NaN/Inf and raises NonFiniteError
on the first offending op rather than letting poison propagate.

Reductions with data-dependent order (segment sums, scatter-adds) always
process indices in ascending order, which keeps results bit-identical across
runs on the same platform.
"""

from __future__ import annotations

import math
import threading
from typing import Callable, Optional, Sequence

import numpy as np


class NonFiniteError(FloatingPointError):
    """An op produced NaN or Inf."""


def _check_finite(data: np.ndarray, op: str) -> None:
    # single-pass guard: a finite sum implies all-finite at the magnitudes
    # seen here (|x| << 1e308 / size); NaN/Inf contaminate the sum
    if not math.isfinite(float(np.sum(data))):
        raise NonFiniteError(f"non-finite value produced by op '{op}'")


class Tensor:
    """Dense float64 array plus tracking flag. Leaves are created directly;
    interior tensors come out of the ops below."""

    __slots__ = ("data", "requires_grad", "node")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.node: Optional[_Node] = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def param(data) -> Tensor:
    """Trainable leaf."""
    return Tensor(data, requires_grad=True)


class _Node:
    __slots__ = ("inputs", "out", "backward")

    def __init__(self, inputs, out, backward):
        self.inputs = inputs
        self.out = out
        self.backward = backward


_LOCAL = threading.local()


def _stack() -> list:
    try:
        return _LOCAL.stack
    except AttributeError:
        _LOCAL.stack = []
        return _LOCAL.stack


class Tape:
    """Records ops executed inside its `with` block.

    Tapes nest; ops record onto the innermost active tape. A tape is
    single-threaded, but independent tapes may live on independent threads.
    """

    __slots__ = ("nodes",)

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc):
        _stack().pop()
        return False

    def gradients(self, loss: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
        """d loss / d p for each p, zeros where loss does not depend on p."""
        if loss.data.size != 1:
            raise ValueError("gradients() needs a scalar loss")
        grads: dict[int, np.ndarray] = {}
        if loss.node is not None:
            grads[id(loss)] = np.ones_like(loss.data)
            for node in reversed(self.nodes):
                g = grads.pop(id(node.out), None)
                if g is None:
                    continue
                for t, gi in zip(node.inputs, node.backward(g)):
                    if gi is None or not t.requires_grad:
                        continue
                    acc = grads.get(id(t))
                    grads[id(t)] = gi if acc is None else acc + gi
        return [grads.get(id(p), np.zeros_like(p.data)) for p in params]


def _record(out_data: np.ndarray, inputs: tuple, backward: Callable, op: str) -> Tensor:
    _check_finite(out_data, op)
    tape = _stack()[-1] if _stack() else None
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=track)
    if track:
        node = _Node(inputs, out, backward)
        out.node = node
        tape.nodes.append(node)
    return out


def _unbroadcast_rows(g: np.ndarray, shape) -> np.ndarray:
    # the only broadcast we support: (1, d) bias against (n, d)
    if g.shape != shape:
        return g.sum(axis=0, keepdims=True)
    return g


# ----------------------------------------------------------------------------
# op vocabulary
# ----------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")

    def backward(g, a=a, b=b):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return ga, gb

    return _record(a.data @ b.data, (a, b), backward, "matmul")


def _binary_shapes_ok(a, b):
    if a.data.shape == b.data.shape:
        return True
    # row-vector broadcast, either side
    for x, y in ((a, b), (b, a)):
        if (
            x.data.ndim == 2
            and y.data.ndim == 2
            and y.data.shape[0] == 1
            and x.data.shape[1] == y.data.shape[1]
        ):
            return True
    return False


def add(a: Tensor, b: Tensor) -> Tensor:
    if not _binary_shapes_ok(a, b):
        raise ValueError(f"add shape mismatch: {a.data.shape} + {b.data.shape}")

    def backward(g, a=a, b=b):
        ga = _unbroadcast_rows(g, a.data.shape) if a.requires_grad else None
        gb = _unbroadcast_rows(g, b.data.shape) if b.requires_grad else None
        return ga, gb

    return _record(a.data + b.data, (a, b), backward, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    if not _binary_shapes_ok(a, b):
        raise ValueError(f"sub shape mismatch: {a.data.shape} - {b.data.shape}")

    def backward(g, a=a, b=b):
        ga = _unbroadcast_rows(g, a.data.shape) if a.requires_grad else None
        gb = -_unbroadcast_rows(g, b.data.shape) if b.requires_grad else None
        return ga, gb

    return _record(a.data - b.data, (a, b), backward, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product, same shapes only."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul shape mismatch: {a.data.shape} * {b.data.shape}")

    def backward(g, a=a, b=b):
        ga = g * b.data if a.requires_grad else None
        gb = g * a.data if b.requires_grad else None
        return ga, gb

    return _record(a.data * b.data, (a, b), backward, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward(g, c=c):
        return (g * c,)

    return _record(a.data * c, (a,), backward, "scale")


def relu(a: Tensor) -> Tensor:
    def backward(g, a=a):
        return (g * (a.data > 0.0),)  # subgradient 0 at exactly 0

    return _record(np.maximum(a.data, 0.0), (a,), backward, "relu")


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def backward(g, out_data=out_data):
        return (g * (1.0 - out_data * out_data),)

    return _record(out_data, (a,), backward, "tanh")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # branch on sign to avoid exp overflow
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    out_data = _sigmoid(a.data)

    def backward(g, out_data=out_data):
        return (g * out_data * (1.0 - out_data),)

    return _record(out_data, (a,), backward, "sigmoid")


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    """Column-wise concatenation: (n, p) ++ (n, q) -> (n, p + q)."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[0] != b.data.shape[0]:
        raise ValueError(f"concat_rows row mismatch: {a.data.shape} ++ {b.data.shape}")
    p = a.data.shape[1]

    def backward(g, p=p, a=a, b=b):
        ga = np.ascontiguousarray(g[:, :p]) if a.requires_grad else None
        gb = np.ascontiguousarray(g[:, p:]) if b.requires_grad else None
        return ga, gb

    return _record(np.concatenate([a.data, b.data], axis=1), (a, b), backward, "concat_rows")


def _scatter_add_rows(n: int, idx: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """out[idx[k]] += rows[k], accumulated in ascending index order."""
    out = np.zeros((n,) + rows.shape[1:], dtype=np.float64)
    if len(idx) == 0:
        return out
    order = np.argsort(idx, kind="stable")
    sidx = idx[order]
    srows = rows[order]
    starts = np.flatnonzero(np.r_[True, sidx[1:] != sidx[:-1]])
    sums = np.add.reduceat(srows, starts, axis=0)
    out[sidx[starts]] = sums
    return out


def gather_rows(a: Tensor, index: np.ndarray) -> Tensor:
    """out[k] = a[index[k]]; duplicate indices allowed."""
    index = np.asarray(index, dtype=np.int64)
    if a.data.ndim != 2 or index.ndim != 1:
        raise ValueError("gather_rows expects a matrix and a 1-d index")
    if len(index) and (index.min() < 0 or index.max() >= a.data.shape[0]):
        raise IndexError("gather_rows index out of range")

    def backward(g, a=a, index=index):
        return (_scatter_add_rows(a.data.shape[0], index, g),)

    return _record(a.data[index], (a,), backward, "gather_rows")


def segment_reduce(a: Tensor, segment_ids: np.ndarray, num_segments: int, mode: str = "sum") -> Tensor:
    """Reduce rows of `a` into `num_segments` buckets; empty segments give
    zero rows. `segment_ids` must be sorted non-decreasing."""
    if mode not in ("sum", "mean"):
        raise ValueError(f"unknown segment_reduce mode {mode!r}")
    ids = np.asarray(segment_ids, dtype=np.int64)
    if a.data.ndim != 2 or ids.ndim != 1 or len(ids) != a.data.shape[0]:
        raise ValueError("segment_reduce expects a matrix and one id per row")
    if len(ids):
        if ids.min() < 0 or ids.max() >= num_segments:
            raise IndexError("segment id out of range")
        if np.any(ids[1:] < ids[:-1]):
            raise ValueError("segment ids must be sorted non-decreasing")

    out = np.zeros((num_segments, a.data.shape[1]), dtype=np.float64)
    counts = np.bincount(ids, minlength=num_segments).astype(np.float64)
    if len(ids):
        starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
        sums = np.add.reduceat(a.data, starts, axis=0)
        out[ids[starts]] = sums
    if mode == "mean":
        np.divide(out, counts[:, None], out=out, where=counts[:, None] > 0)

    def backward(g, a=a, ids=ids, counts=counts, mode=mode):
        gin = g[ids]
        if mode == "mean":
            gin = gin / counts[ids][:, None]
        return (gin,)

    return _record(out, (a,), backward, f"segment_{mode}")


def sum_all(a: Tensor) -> Tensor:
    def backward(g, a=a):
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _record(np.sum(a.data), (a,), backward, "sum_all")


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size

    def backward(g, a=a, n=n):
        return (np.broadcast_to(g / n, a.data.shape).copy(),)

    return _record(np.mean(a.data), (a,), backward, "mean_all")


def rownorm(a: Tensor) -> Tensor:
    """Euclidean norm of each row: (n, d) -> (n, 1). Zero rows get zero grad."""
    if a.data.ndim != 2:
        raise ValueError("rownorm expects a matrix")
    out_data = np.sqrt(np.sum(a.data * a.data, axis=1, keepdims=True))

    def backward(g, a=a, out_data=out_data):
        safe = np.where(out_data > 0.0, out_data, 1.0)
        return (g * a.data / safe,)

    return _record(out_data, (a,), backward, "rownorm")


def mse(pred: Tensor, target: Tensor) -> Tensor:
    """Mean over all entries of squared error."""
    diff = sub(pred, target)
    return mean_all(mul(diff, diff))


def bce_with_logits(logits: Tensor, targets: Tensor) -> Tensor:
    """Mean binary cross-entropy on raw logits, numerically stable.

    Targets are treated as constants (no gradient flows to them).
    """
    z = logits.data
    y = targets.data
    if z.shape != y.shape:
        raise ValueError(f"bce shape mismatch: {z.shape} vs {y.shape}")
    # max(z,0) - z*y + log(1 + exp(-|z|))
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    out_data = np.mean(per)
    n = z.size

    def backward(g, logits=logits, y=y, n=n):
        if not logits.requires_grad:
            return (None, None)
        return (g * (_sigmoid(logits.data) - y) / n, None)

    return _record(out_data, (logits, targets), backward, "bce_with_logits")
