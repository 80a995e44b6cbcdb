"""Reverse-mode automatic differentiation over numpy arrays.

A :class:`Value` wraps a float64 array together with its accumulated
gradient and a vector-Jacobian product closure that maps the node's
gradient onto its parents.  Graphs are built eagerly by the operators below;
:meth:`Value.backward` walks them once in reverse topological order.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import ShapeError


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Value:
    """Node of a computation graph.

    Leaves created with ``requires_grad=True`` are parameters; every other node
    requires a gradient iff one of its parents does.
    """

    __slots__ = ("data", "grad", "op", "parents", "requires_grad", "_vjp")

    def __init__(self, data, requires_grad: bool = False, parents: Sequence["Value"] = (),
                 op: str = "leaf", vjp: Callable | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data)
        self.op = op
        self.parents = tuple(parents)
        self.requires_grad = requires_grad
        self._vjp = vjp

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __repr__(self):
        return f"Value(shape={self.shape}, op={self.op!r})"

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def detach(self) -> "Value":
        return Value(self.data.copy())

    def numpy(self) -> np.ndarray:
        return self.data

    # -- graph traversal ---------------------------------------------------

    def _topo(self) -> list["Value"]:
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        return order

    def backward(self):
        """Accumulate d(self)/d(node) into ``grad`` of every reachable node."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar root, got shape {self.shape}")
        if not self.requires_grad:
            return
        order = self._topo()
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._vjp is None:
                continue
            pgrads = node._vjp(node.grad)
            for p, g in zip(node.parents, pgrads):
                if g is None or not p.requires_grad:
                    continue
                p.grad = p.grad + _unbroadcast(np.asarray(g, dtype=np.float64), p.shape)

    # -- operators ---------------------------------------------------------

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

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return vsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_value(x) -> Value:
    return x if isinstance(x, Value) else Value(x)


def make(data, parents: Iterable[Value], op: str, vjp: Callable) -> Value:
    """Create an interior node; ``vjp(grad)`` returns one gradient per parent."""
    parents = tuple(parents)
    return Value(data, requires_grad=any(p.requires_grad for p in parents),
                 parents=parents, op=op, vjp=vjp)


def add(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    return make(a.data + b.data, (a, b), "add", lambda g: (g, g))


def sub(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    return make(a.data - b.data, (a, b), "sub", lambda g: (g, -g))


def mul(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    return make(a.data * b.data, (a, b), "mul", lambda g: (g * b.data, g * a.data))


def div(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    out = a.data / b.data
    return make(out, (a, b), "div", lambda g: (g / b.data, -g * out / b.data))


def power(a, exponent: float) -> Value:
    a = as_value(a)
    p = float(exponent)
    return make(a.data ** p, (a,), "pow", lambda g: (g * p * a.data ** (p - 1.0),))


def matmul(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} and {b.shape} are incompatible")
    return make(a.data @ b.data, (a, b), "matmul",
                lambda g: (g @ b.data.T, a.data.T @ g))


def transpose(a) -> Value:
    a = as_value(a)
    return make(a.data.T, (a,), "transpose", lambda g: (g.T,))


def reshape(a, shape) -> Value:
    a = as_value(a)
    old = a.shape
    return make(a.data.reshape(shape), (a,), "reshape", lambda g: (g.reshape(old),))


def _expand(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        axes = (axis,) if np.isscalar(axis) else tuple(axis)
        axes = tuple(ax % len(shape) for ax in axes)
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


def vsum(a, axis=None, keepdims=False) -> Value:
    a = as_value(a)
    return make(a.data.sum(axis=axis, keepdims=keepdims), (a,), "sum",
                lambda g: (_expand(g, a.shape, axis, keepdims).copy(),))


def mean(a, axis=None, keepdims=False) -> Value:
    a = as_value(a)
    n = a.data.size // np.asarray(a.data.sum(axis=axis, keepdims=keepdims)).size
    return make(a.data.mean(axis=axis, keepdims=keepdims), (a,), "mean",
                lambda g: (_expand(g, a.shape, axis, keepdims) / n,))


def log(a) -> Value:
    a = as_value(a)
    return make(np.log(a.data), (a,), "log", lambda g: (g / a.data,))


def exp(a) -> Value:
    a = as_value(a)
    out = np.exp(a.data)
    return make(out, (a,), "exp", lambda g: (g * out,))


def sigmoid(a) -> Value:
    a = as_value(a)
    # split by sign so large |x| does not overflow exp
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return make(out, (a,), "sigmoid", lambda g: (g * out * (1.0 - out),))


def leaky_relu(a, slope: float = 0.2) -> Value:
    a = as_value(a)
    scale = np.where(a.data > 0, 1.0, slope)
    return make(a.data * scale, (a,), "leaky_relu", lambda g: (g * scale,))


def clip(a, lo: float, hi: float) -> Value:
    """Clamp to [lo, hi]; the gradient is zero where the clamp is active."""
    a = as_value(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return make(np.clip(a.data, lo, hi), (a,), "clip", lambda g: (g * inside,))


def concat(values, axis: int = 0) -> Value:
    values = [as_value(v) for v in values]
    sizes = np.cumsum([v.shape[axis] for v in values])[:-1]

    def vjp(g):
        return tuple(np.split(g, sizes, axis=axis))

    return make(np.concatenate([v.data for v in values], axis=axis), values, "concat", vjp)


def getitem(a, index) -> Value:
    a = as_value(a)

    def vjp(g):
        out = np.zeros_like(a.data)
        np.add.at(out, index, g)
        return (out,)

    return make(a.data[index], (a,), "getitem", vjp)
