"""Dense numeric arrays with reverse-mode automatic differentiation.

A DiffArray wraps a numpy array and remembers how it was produced; calling
``backward()`` on a scalar accumulates gradients into every reachable leaf
created with ``requires_grad=True``. All ops broadcast like numpy.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to the shape the operand had before broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class DiffArray:
    __slots__ = ("value", "grad", "requires_grad", "_parents")

    def __init__(self, value, requires_grad: bool = False, _parents=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p, _ in _parents)
        self._parents = _parents if self.requires_grad else ()

    # -- construction helpers ------------------------------------------------
    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"DiffArray(shape={self.value.shape}, requires_grad={self.requires_grad})"

    # -- backward pass -------------------------------------------------------
    def backward(self, seed=None):
        if seed is None:
            if self.value.size != 1:
                raise ValueError("backward() without a seed requires a scalar output")
            seed = np.ones_like(self.value)
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent, _ in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        grads: dict[int, np.ndarray] = {id(self): np.asarray(seed, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad and not node._parents:
                node.grad = g if node.grad is None else node.grad + g
            for parent, vjp in node._parents:
                if not parent.requires_grad:
                    continue
                pg = vjp(g)
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

    def zero_grad(self):
        self.grad = None

    # -- operators -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def item(self) -> float:
        return float(self.value)


def as_diff(x) -> DiffArray:
    return x if isinstance(x, DiffArray) else DiffArray(x)


def constant(x) -> DiffArray:
    return DiffArray(x)


def parameter(x) -> DiffArray:
    return DiffArray(np.array(x, dtype=np.float64), requires_grad=True)


# -- elementwise arithmetic --------------------------------------------------

def add(a, b) -> DiffArray:
    a, b = as_diff(a), as_diff(b)
    out = a.value + b.value
    return DiffArray(out, _parents=(
        (a, lambda g: _unbroadcast(g, a.value.shape)),
        (b, lambda g: _unbroadcast(g, b.value.shape)),
    ))


def sub(a, b) -> DiffArray:
    a, b = as_diff(a), as_diff(b)
    out = a.value - b.value
    return DiffArray(out, _parents=(
        (a, lambda g: _unbroadcast(g, a.value.shape)),
        (b, lambda g: _unbroadcast(-g, b.value.shape)),
    ))


def mul(a, b) -> DiffArray:
    a, b = as_diff(a), as_diff(b)
    out = a.value * b.value
    return DiffArray(out, _parents=(
        (a, lambda g: _unbroadcast(g * b.value, a.value.shape)),
        (b, lambda g: _unbroadcast(g * a.value, b.value.shape)),
    ))


def div(a, b) -> DiffArray:
    a, b = as_diff(a), as_diff(b)
    out = a.value / b.value
    return DiffArray(out, _parents=(
        (a, lambda g: _unbroadcast(g / b.value, a.value.shape)),
        (b, lambda g: _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape)),
    ))


def square(a) -> DiffArray:
    a = as_diff(a)
    return DiffArray(a.value * a.value, _parents=((a, lambda g: g * 2.0 * a.value),))


def exp(a) -> DiffArray:
    a = as_diff(a)
    out = np.exp(a.value)
    return DiffArray(out, _parents=((a, lambda g: g * out),))


def log(a) -> DiffArray:
    a = as_diff(a)
    return DiffArray(np.log(a.value), _parents=((a, lambda g: g / a.value),))


def sqrt(a) -> DiffArray:
    a = as_diff(a)
    out = np.sqrt(a.value)
    return DiffArray(out, _parents=((a, lambda g: g * 0.5 / out),))


def tanh(a) -> DiffArray:
    a = as_diff(a)
    out = np.tanh(a.value)
    return DiffArray(out, _parents=((a, lambda g: g * (1.0 - out * out)),))


def absolute(a) -> DiffArray:
    # subgradient 0 at exactly 0
    a = as_diff(a)
    return DiffArray(np.abs(a.value), _parents=((a, lambda g: g * np.sign(a.value)),))


def elu(a, alpha: float = 1.0) -> DiffArray:
    a = as_diff(a)
    neg = alpha * np.expm1(a.value)
    out = np.where(a.value >= 0.0, a.value, neg)
    deriv = np.where(a.value >= 0.0, 1.0, neg + alpha)
    return DiffArray(out, _parents=((a, lambda g: g * deriv),))


# -- linear algebra / shape --------------------------------------------------

def matmul(a, b) -> DiffArray:
    a, b = as_diff(a), as_diff(b)
    out = a.value @ b.value

    def grad_a(g):
        ga = g @ np.swapaxes(b.value, -1, -2)
        return _unbroadcast(ga, a.value.shape)

    def grad_b(g):
        gb = np.swapaxes(a.value, -1, -2) @ g
        return _unbroadcast(gb, b.value.shape)

    return DiffArray(out, _parents=((a, grad_a), (b, grad_b)))


def reshape(a, shape) -> DiffArray:
    a = as_diff(a)
    old = a.value.shape
    return DiffArray(a.value.reshape(shape), _parents=((a, lambda g: g.reshape(old)),))


def sum_(a, axis=None, keepdims=False) -> DiffArray:
    a = as_diff(a)
    out = a.value.sum(axis=axis, keepdims=keepdims)

    def grad(g):
        if axis is None:
            return np.broadcast_to(g, a.value.shape).copy()
        ax = axis if isinstance(axis, tuple) else (axis,)
        if not keepdims:
            g = np.expand_dims(g, ax)
        return np.broadcast_to(g, a.value.shape).copy()

    return DiffArray(out, _parents=((a, grad),))


def mean(a, axis=None, keepdims=False) -> DiffArray:
    a = as_diff(a)
    count = a.value.size if axis is None else np.prod(
        [a.value.shape[i] for i in (axis if isinstance(axis, tuple) else (axis,))])
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / float(count))


def concatenate(arrays, axis: int = -1) -> DiffArray:
    arrays = [as_diff(a) for a in arrays]
    if len({a.value.ndim for a in arrays}) != 1:
        raise ValueError("concatenate requires equal ranks")
    out = np.concatenate([a.value for a in arrays], axis=axis)
    sizes = [a.value.shape[axis] for a in arrays]
    offsets = np.cumsum([0] + sizes)

    def make_grad(i):
        lo, hi = offsets[i], offsets[i + 1]

        def grad(g):
            slicer = [slice(None)] * g.ndim
            slicer[axis if axis >= 0 else g.ndim + axis] = slice(lo, hi)
            return g[tuple(slicer)]

        return grad

    return DiffArray(out, _parents=tuple((a, make_grad(i)) for i, a in enumerate(arrays)))


def take_along(a, indices: np.ndarray, axis: int) -> DiffArray:
    """Gather with fixed (non-differentiable) indices, as in sorted matching."""
    a = as_diff(a)
    out = np.take_along_axis(a.value, indices, axis=axis)

    def grad(g):
        acc = np.zeros_like(a.value)
        np.put_along_axis(acc, indices, g, axis=axis)  # indices are a permutation per lane
        return acc

    return DiffArray(out, _parents=((a, grad),))


def pairwise_dist(p) -> DiffArray:
    """Euclidean distance matrix (..., n, n) of positions (..., n, 2).

    The diagonal is exactly zero and receives zero gradient.
    """
    p = as_diff(p)
    v = p.value
    diff = v[..., :, None, :] - v[..., None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=-1))
    n = v.shape[-2]
    eye = np.eye(n, dtype=bool)
    safe = np.where(d > 0.0, d, 1.0)

    def grad(g):
        w = (g + np.swapaxes(g, -1, -2)) / safe
        w = np.where(d > 0.0, w, 0.0)
        w[..., eye] = 0.0
        return w.sum(axis=-1)[..., None] * v - w @ v

    return DiffArray(d, _parents=((p, grad),))
