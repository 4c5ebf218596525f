"""A small dense-tensor engine with reverse-mode differentiation.

Values are 2-D numpy arrays (float64 unless the default dtype is changed).
Each op returns a new :class:`Tensor` remembering its parents and a closure
that pushes the output gradient back to them; :func:`backward` walks the
recorded graph in reverse topological order.
"""
from __future__ import annotations

import os
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import ndtr

from graphite import kernels

_DTYPE = np.float64
DEBUG = os.environ.get("GRAPHITE_DEBUG", "") not in ("", "0")


def set_default_dtype(dtype) -> None:
    global _DTYPE
    _DTYPE = np.dtype(dtype).type


def set_debug(flag: bool) -> None:
    global DEBUG
    DEBUG = bool(flag)


class NonFiniteError(FloatingPointError):
    pass


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "parents", "_backward", "name")

    def __init__(self, value, requires_grad: bool = False, parents: Sequence[Tensor] = (),
                 backward: Callable[[np.ndarray], None] | None = None, name: str | None = None):
        v = np.asarray(value, dtype=_DTYPE)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        elif v.ndim == 1:
            v = v.reshape(-1, 1)
        self.value = v
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.parents = tuple(parents)
        self._backward = backward
        self.name = name
        if DEBUG and not np.isfinite(v).all():
            raise NonFiniteError(f"non-finite value produced by {name or 'op'}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def item(self) -> float:
        if self.value.size != 1:
            raise ValueError("item() needs a single-element tensor")
        return float(self.value[0, 0])

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.value.dtype, copy=True)
        else:
            self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}, name={self.name!r})"

    # operator sugar used by the model code
    def __add__(self, other):
        return add(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def parameter(value, name: str | None = None) -> Tensor:
    return Tensor(value, requires_grad=True, name=name)


def constant(value) -> Tensor:
    return Tensor(value)


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor) -> None:
    (ra, ca), (rb, cb) = a.shape, b.shape
    if not ((rb in (1, ra)) and (cb in (1, ca))):
        raise ValueError(f"shape mismatch: {a.shape} and {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    """``a + b``; ``b`` may be a row vector (1, m) or a scalar (1, 1)."""
    _check_broadcast(a, b)
    out = Tensor(a.value + b.value, parents=(a, b), name="add")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    out._backward = backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} and {b.shape}")
    out = Tensor(a.value * b.value, parents=(a, b), name="mul")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * b.value)
        if b.requires_grad:
            b._accumulate(g * a.value)

    out._backward = backward
    return out


def scale(a: Tensor, c) -> Tensor:
    """Multiply by a constant scalar or a constant array of ``a``'s shape."""
    c = np.asarray(c, dtype=_DTYPE)
    if c.ndim == 1:
        c = c.reshape(-1, 1)
    out = Tensor(a.value * c, parents=(a,), name="scale")

    def backward(g):
        a._accumulate(_unbroadcast(g * c, a.shape) if c.ndim else g * c)

    out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = Tensor(a.value @ b.value, parents=(a, b), name="matmul")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.value.T)
        if b.requires_grad:
            b._accumulate(a.value.T @ g)

    out._backward = backward
    return out


def sparse_matmul(m: sp.spmatrix, b: Tensor) -> Tensor:
    """Constant sparse matrix times a tensor."""
    if m.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {m.shape} @ {b.shape}")
    m = sp.csr_matrix(m)
    out = Tensor(np.asarray(m @ b.value), parents=(b,), name="sparse_matmul")

    def backward(g):
        b._accumulate(np.asarray(m.T @ g))

    out._backward = backward
    return out


def row_slice(a: Tensor, start: int, stop: int) -> Tensor:
    out = Tensor(a.value[start:stop], parents=(a,), name="row_slice")

    def backward(g):
        full = np.zeros_like(a.value)
        full[start:stop] = g
        a._accumulate(full)

    out._backward = backward
    return out


def gather_rows(a: Tensor, index: np.ndarray) -> Tensor:
    index = np.asarray(index, dtype=np.int64)
    out = Tensor(a.value[index], parents=(a,), name="gather_rows")

    def backward(g):
        full = np.zeros_like(a.value)
        np.add.at(full, index, g)
        a._accumulate(full)

    out._backward = backward
    return out


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.value)
    out = Tensor(t, parents=(a,), name="tanh")

    def backward(g):
        a._accumulate(g * (1.0 - t * t))

    out._backward = backward
    return out


tanh_gate = tanh

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a: Tensor) -> Tensor:
    """Exact GELU ``x * Phi(x)`` with the Gaussian CDF (no tanh approximation)."""
    x = a.value
    cdf = ndtr(x)
    out = Tensor(x * cdf, parents=(a,), name="gelu")

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        a._accumulate(g * (cdf + x * pdf))

    out._backward = backward
    return out


def dropout(a: Tensor, p: float, rng: np.random.Generator | int | None, train: bool = True) -> Tensor:
    """Inverted dropout; identity when ``p == 0`` or outside training."""
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    if not train or p == 0.0:
        return a
    rng = np.random.default_rng(rng)
    mask = (rng.random(a.shape) >= p).astype(_DTYPE) / (1.0 - p)
    out = Tensor(a.value * mask, parents=(a,), name="dropout")

    def backward(g):
        a._accumulate(g * mask)

    out._backward = backward
    return out


def edge_spmm(indptr: np.ndarray, cols: np.ndarray, w: Tensor, h: Tensor) -> Tensor:
    """``out[r] = sum_e w[e] * h[cols[e]]`` over messages ``e`` of row ``r``.

    Messages are grouped by target row through ``indptr`` (CSR layout), so
    the output has ``len(indptr) - 1`` rows.
    """
    if w.shape != (len(cols), 1):
        raise ValueError(f"edge weights must have shape ({len(cols)}, 1), got {w.shape}")
    wv = np.ascontiguousarray(w.value[:, 0], dtype=np.float64)
    hv = np.ascontiguousarray(h.value, dtype=np.float64)
    out = Tensor(kernels.spmm(indptr, cols, wv, hv), parents=(w, h), name="edge_spmm")

    def backward(g):
        gw, gh = kernels.spmm_backward(indptr, cols, wv, hv, np.ascontiguousarray(g, dtype=np.float64))
        if w.requires_grad:
            w._accumulate(gw.reshape(-1, 1))
        if h.requires_grad:
            h._accumulate(gh)

    out._backward = backward
    return out


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean negative log-softmax at the true class over rows selected by ``mask``."""
    idx = np.flatnonzero(mask) if np.asarray(mask).dtype == bool else np.asarray(mask, dtype=np.int64)
    if len(idx) == 0:
        raise ValueError("empty loss mask")
    y = np.asarray(labels, dtype=np.int64)[idx]
    z = logits.value[idx]
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(len(idx)), y]))
    out = Tensor(loss, parents=(logits,), name="cross_entropy")

    def backward(g):
        p = np.exp(z - logsum[:, None])
        p[np.arange(len(idx)), y] -= 1.0
        full = np.zeros_like(logits.value)
        full[idx] = p * (g[0, 0] / len(idx))
        logits._accumulate(full)

    out._backward = backward
    return out


class Tape:
    """Reverse-topological record of every op reachable from an output."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def record(cls, output: Tensor) -> Tape:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(output, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        return cls(order)

    def backward(self, output: Tensor) -> None:
        if output.shape != (1, 1):
            raise ValueError(f"backward needs a scalar output, got shape {output.shape}")
        for node in self.nodes:
            node.grad = None
        output.grad = np.ones((1, 1), dtype=output.value.dtype)
        for node in reversed(self.nodes):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if DEBUG and not np.isfinite(node.grad).all():
                    raise NonFiniteError(f"non-finite gradient at {node.name}")

    def parameters(self) -> list[Tensor]:
        return [n for n in self.nodes if not n.parents and n.requires_grad]


def backward(loss: Tensor) -> Tape:
    """Populate ``.grad`` of every tensor that ``loss`` depends on; return the tape."""
    if loss.shape != (1, 1):
        raise ValueError(f"backward needs a scalar output, got shape {loss.shape}")
    tape = Tape.record(loss)
    tape.backward(loss)
    return tape
