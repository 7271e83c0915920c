"""Minimal reverse-mode autodiff over numpy arrays (float64).

Just enough machinery for the toy mesh networks: dense/sparse matmul, the
spiral gather, elementwise activations, dropout masks, concatenation and
mean-L1 losses. Each op returns a Var whose ``grad_fn`` scatters the output
gradient back to its parents; ``backward`` runs the tape in reverse
topological order.
"""
from __future__ import annotations

import numpy as np


class Var:
    __slots__ = ("value", "grad", "parents", "grad_fn")

    def __init__(self, value, parents=(), grad_fn=None):
        self.value = np.asarray(value, dtype=float)
        self.grad = None
        self.parents = parents
        self.grad_fn = grad_fn

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad = None


def backward(root: Var) -> None:
    order = []
    seen = set()

    def topo(v):
        if id(v) in seen:
            return
        seen.add(id(v))
        for p in v.parents:
            topo(p)
        order.append(v)

    topo(root)
    root.grad = np.ones_like(root.value)
    for v in reversed(order):
        if v.grad_fn is not None and v.grad is not None:
            v.grad_fn(v.grad)


def _accum(v: Var, g: np.ndarray) -> None:
    if v.grad is None:
        v.grad = np.zeros_like(v.value)
    v.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def constant(value) -> Var:
    return Var(value)


def matmul(a: Var, b: Var) -> Var:
    out = Var(a.value @ b.value, (a, b))
    def grad_fn(g):
        _accum(a, g @ b.value.T)
        _accum(b, a.value.T @ g)
    out.grad_fn = grad_fn
    return out


def add(a: Var, b: Var) -> Var:
    out = Var(a.value + b.value, (a, b))
    def grad_fn(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(g, b.value.shape))
    out.grad_fn = grad_fn
    return out


def sub(a: Var, b: Var) -> Var:
    out = Var(a.value - b.value, (a, b))
    def grad_fn(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, -_unbroadcast(g, b.value.shape))
    out.grad_fn = grad_fn
    return out


def scale(a: Var, s: float) -> Var:
    out = Var(a.value * s, (a,))
    out.grad_fn = lambda g: _accum(a, g * s)
    return out


def relu(a: Var) -> Var:
    mask = a.value > 0
    out = Var(np.where(mask, a.value, 0.0), (a,))
    out.grad_fn = lambda g: _accum(a, g * mask)
    return out


def elu(a: Var, alpha: float = 1.0) -> Var:
    pos = a.value > 0
    ex = np.exp(np.minimum(a.value, 0.0))
    out = Var(np.where(pos, a.value, alpha * (ex - 1.0)), (a,))
    out.grad_fn = lambda g: _accum(a, g * np.where(pos, 1.0, alpha * ex))
    return out


def dropout(a: Var, mask: np.ndarray) -> Var:
    """Apply a precomputed (already keep-probability-scaled) dropout mask."""
    out = Var(a.value * mask, (a,))
    out.grad_fn = lambda g: _accum(a, g * mask)
    return out


def reshape(a: Var, shape) -> Var:
    out = Var(a.value.reshape(shape), (a,))
    out.grad_fn = lambda g: _accum(a, g.reshape(a.value.shape))
    return out


def concat(vars_, axis: int = 0) -> Var:
    out = Var(np.concatenate([v.value for v in vars_], axis=axis), tuple(vars_))
    sizes = [v.value.shape[axis] for v in vars_]
    def grad_fn(g):
        start = 0
        for v, s in zip(vars_, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(start, start + s)
            _accum(v, g[tuple(sl)])
            start += s
    out.grad_fn = grad_fn
    return out


def spiral_gather(a: Var, indices: np.ndarray) -> Var:
    """(N, C) features -> (N, S*C) spiral-concatenated; PAD (-1) gathers zero."""
    n, c = a.value.shape
    s = indices.shape[1]
    valid = indices >= 0
    safe = np.clip(indices, 0, n - 1)
    gathered = np.where(valid[:, :, None], a.value[safe], 0.0)
    out = Var(gathered.reshape(n, s * c), (a,))
    def grad_fn(g):
        g3 = g.reshape(n, s, c) * valid[:, :, None]
        ga = np.zeros_like(a.value)
        np.add.at(ga, safe.ravel(), g3.reshape(-1, c))
        _accum(a, ga)
    out.grad_fn = grad_fn
    return out


def sparse_mm(M, a: Var) -> Var:
    """Fixed sparse matrix times a Var: out = M @ a."""
    out = Var(M @ a.value, (a,))
    out.grad_fn = lambda g: _accum(a, M.T @ g)
    return out


def l1_mean(a: Var, b: Var) -> Var:
    """mean |a - b| as a scalar Var (sign(0) subgradient = 0)."""
    diff = a.value - b.value
    out = Var(np.mean(np.abs(diff)), (a, b))
    def grad_fn(g):
        s = np.sign(diff) * (float(g) / diff.size)
        _accum(a, s)
        _accum(b, -s)
    out.grad_fn = grad_fn
    return out


def add_scalars(vars_) -> Var:
    out = Var(sum(v.value for v in vars_), tuple(vars_))
    def grad_fn(g):
        for v in vars_:
            _accum(v, g)
    out.grad_fn = grad_fn
    return out


def sum_all(a: Var) -> Var:
    out = Var(a.value.sum(), (a,))
    out.grad_fn = lambda g: _accum(a, np.full_like(a.value, float(g)))
    return out
