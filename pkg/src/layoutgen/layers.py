"""Neural layers on top of the autodiff core: dense, batch norm, GIN, GCN."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from .autodiff import DiffArray
from .graphs import Graph


def glorot_init(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class Dense:
    w: DiffArray
    b: DiffArray

    @classmethod
    def init(cls, fan_in: int, fan_out: int, rng: np.random.Generator) -> "Dense":
        return cls(w=ad.parameter(glorot_init(fan_in, fan_out, rng)),
                   b=ad.parameter(np.zeros(fan_out)))

    def params(self):
        return [("w", self.w), ("b", self.b)]


@dataclass
class BatchNorm:
    gamma: DiffArray
    beta: DiffArray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.9
    eps: float = 1e-5

    @classmethod
    def init(cls, width: int, momentum: float = 0.9) -> "BatchNorm":
        return cls(gamma=ad.parameter(np.ones(width)), beta=ad.parameter(np.zeros(width)),
                   running_mean=np.zeros(width), running_var=np.ones(width),
                   momentum=momentum)

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]


def linear(x, dense: Dense) -> DiffArray:
    return ad.add(ad.matmul(x, dense.w), dense.b)


def elu(x) -> DiffArray:
    return ad.elu(x)


def batch_norm(x, bn: BatchNorm, mode: str = "train") -> DiffArray:
    """Normalize per feature channel over all leading axes.

    Train mode uses batch statistics and updates the running estimates;
    eval mode uses the running estimates only.
    """
    x = ad.as_diff(x)
    axes = tuple(range(x.ndim - 1))
    if mode == "train":
        if int(np.prod([x.shape[a] for a in axes])) < 2:
            raise ValueError("batch norm in train mode needs at least 2 samples")
        mu = ad.mean(x, axis=axes, keepdims=True)
        var = ad.mean(ad.square(ad.sub(x, mu)), axis=axes, keepdims=True)
        bn.running_mean = bn.momentum * bn.running_mean + (1 - bn.momentum) * mu.value.reshape(-1)
        bn.running_var = bn.momentum * bn.running_var + (1 - bn.momentum) * var.value.reshape(-1)
        norm = ad.div(ad.sub(x, mu), ad.sqrt(ad.add(var, bn.eps)))
    elif mode == "eval":
        norm = ad.div(ad.sub(x, bn.running_mean), np.sqrt(bn.running_var + bn.eps))
    else:
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    return ad.add(ad.mul(norm, bn.gamma), bn.beta)


@lru_cache(maxsize=64)
def neighbor_mean_matrix(g: Graph) -> np.ndarray:
    """Row v averages the rows of v's neighbors; zero row for isolated nodes."""
    m = np.zeros((g.n, g.n))
    for v in range(g.n):
        neigh = g.adjacency[v]
        if neigh:
            m[v, list(neigh)] = 1.0 / len(neigh)
    return m


@lru_cache(maxsize=64)
def gcn_norm_matrix(g: Graph) -> np.ndarray:
    """Symmetric-normalized propagation D^-1/2 (A + I) D^-1/2."""
    a = g.adjacency_matrix() + np.eye(g.n)
    dinv = 1.0 / np.sqrt(a.sum(axis=1))
    return a * dinv[:, None] * dinv[None, :]


def gin_layer(h, g: Graph, eps: float, mlp) -> DiffArray:
    """(1 + eps) * h_v + mean of neighbor rows, transformed by ``mlp``."""
    h = ad.as_diff(h)
    agg = ad.matmul(ad.constant(neighbor_mean_matrix(g)), h)
    return mlp(ad.add(ad.mul(h, 1.0 + eps), agg))


def gcn_layer(h, g: Graph, w) -> DiffArray:
    h = ad.as_diff(h)
    return ad.matmul(ad.matmul(ad.constant(gcn_norm_matrix(g)), h), w)


def concat_layers(*hs) -> DiffArray:
    rows = {h.shape[-2] for h in map(ad.as_diff, hs)}
    if len(rows) != 1:
        raise ValueError(f"row counts differ: {sorted(rows)}")
    return ad.concatenate(list(hs), axis=-1)


def mean_readout(h) -> DiffArray:
    """Column means over the node axis (second-to-last)."""
    h = ad.as_diff(h)
    if h.shape[-2] < 1:
        raise ValueError("mean readout needs at least one row")
    return ad.mean(h, axis=h.ndim - 2)


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    worst_index: tuple
    per_param: dict = field(default_factory=dict)

    def ok(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def grad_check(fn, named_params, h: float = 1e-5) -> GradCheckReport:
    """Compare reverse-mode gradients of scalar ``fn()`` against central
    finite differences over every element of every parameter."""
    params = list(named_params)
    for _, p in params:
        p.zero_grad()
    out = fn()
    out.backward()
    analytic = {name: (np.zeros_like(p.value) if p.grad is None else p.grad.copy())
                for name, p in params}
    worst = 0.0
    worst_param = ""
    worst_index = ()
    per_param = {}
    for name, p in params:
        num = np.zeros_like(p.value)
        flat = p.value.reshape(-1)
        nflat = num.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = float(fn().value)
            flat[i] = orig - h
            lo = float(fn().value)
            flat[i] = orig
            nflat[i] = (hi - lo) / (2 * h)
        diff = np.abs(analytic[name] - num)
        denom = np.maximum(np.maximum(np.abs(analytic[name]), np.abs(num)), 1e-6)
        rel = diff / denom
        per_param[name] = float(rel.max()) if rel.size else 0.0
        if rel.size and rel.max() > worst:
            worst = float(rel.max())
            worst_param = name
            worst_index = np.unravel_index(int(rel.argmax()), rel.shape)
    return GradCheckReport(max_rel_error=worst, worst_param=worst_param,
                           worst_index=tuple(int(i) for i in worst_index),
                           per_param=per_param)
