"""Reverse-mode automatic differentiation over float64 numpy arrays.

A deliberately small tape: only the operations the transformer stack needs,
each with a hand-derived vector-Jacobian product. Everything runs in float64
so finite-difference verification of the whole model is meaningful.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable tape construction inside the block (inference fast path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A float64 array plus its place in the backward tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False, parents=(), vjp=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Operator sugar for the handful of infix uses in model code.
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, neg(other))


def param(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _result(data, parents: tuple[Tensor, ...], vjp) -> Tensor:
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, vjp=vjp)
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient back down to the shape it was broadcast from."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _result(out, (a, b), vjp)


def neg(a: Tensor) -> Tensor:
    return _result(-a.data, (a,), lambda g: (-g,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def vjp(g):
        return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

    return _result(out, (a, b), vjp)


def scale(a: Tensor, c: float) -> Tensor:
    return _result(a.data * c, (a,), lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data @ b.data

    def vjp(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape)
        return ga, gb

    return _result(out, (a, b), vjp)


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = np.argsort(axes)
    return _result(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = a.data.shape
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def take_rows(table: Tensor, idx: np.ndarray) -> Tensor:
    """Embedding lookup: out[..., :] = table[idx[...], :]."""
    idx = np.asarray(idx)
    out = table.data[idx]

    def vjp(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        return (gt,)

    return _result(out, (table,), vjp)


def take_time(x: Tensor, t_idx: np.ndarray) -> Tensor:
    """Gather one time step per batch row: out[i] = x[i, t_idx[i]]."""
    t_idx = np.asarray(t_idx)
    rows = np.arange(x.data.shape[0])
    out = x.data[rows, t_idx]

    def vjp(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (rows, t_idx), g)
        return (gx,)

    return _result(out, (x,), vjp)


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along axis 0 (vocabulary expansion)."""
    split = a.data.shape[0]
    out = np.concatenate([a.data, b.data], axis=0)

    def vjp(g):
        return g[:split], g[split:]

    return _result(out, (a, b), vjp)


def gelu(a: Tensor) -> Tensor:
    x = a.data
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    out = x * cdf

    def vjp(g):
        pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
        return (g * (cdf + x * pdf),)

    return _result(out, (a,), vjp)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = gamma.data * xhat + beta.data

    def vjp(g):
        reduce_axes = tuple(range(g.ndim - 1))
        gbeta = g.sum(axis=reduce_axes)
        ggamma = (g * xhat).sum(axis=reduce_axes)
        dxhat = g * gamma.data
        gx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return gx, ggamma, gbeta

    return _result(out, (x, gamma, beta), vjp)


def softmax_last(x: Tensor, bias: np.ndarray | None = None) -> Tensor:
    """Softmax over the last axis; ``bias`` is an additive constant mask
    (may contain -inf) that takes no gradient."""
    z = x.data if bias is None else x.data + bias
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        dot = (g * s).sum(axis=-1, keepdims=True)
        return ((g - dot) * s,)

    return _result(s, (x,), vjp)


def masked_cross_entropy(logits: Tensor, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean cross-entropy over positions where mask is true.

    logits: (..., C); targets: integer array matching logits[..., 0];
    mask: boolean array of the same shape as targets.
    """
    z = logits.data
    targets = np.asarray(targets)
    mask = np.asarray(mask, dtype=np.float64)
    count = mask.sum()
    if count == 0:
        raise ValueError("cross-entropy needs at least one unmasked target")
    zmax = z.max(axis=-1, keepdims=True)
    lse = zmax[..., 0] + np.log(np.exp(z - zmax).sum(axis=-1))
    picked = np.take_along_axis(z, targets[..., None], axis=-1)[..., 0]
    loss = ((lse - picked) * mask).sum() / count

    def vjp(g):
        p = np.exp(z - zmax)
        p /= p.sum(axis=-1, keepdims=True)
        onehot_grad = p
        np.subtract.at(onehot_grad, (*np.indices(targets.shape), targets), 1.0)
        return (onehot_grad * (mask * (float(g) / count))[..., None],)

    return _result(np.float64(loss), (logits,), vjp)


def backward(root: Tensor) -> None:
    """Accumulate gradients of ``root`` (a scalar) into every reachable
    requires_grad tensor's ``.grad``."""
    if root.data.size != 1:
        raise ValueError("backward expects a scalar root")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))

    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._vjp is None or node.grad is None:
            continue
        for parent, g in zip(node._parents, node._vjp(node.grad)):
            if g is None or not parent.requires_grad:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g
