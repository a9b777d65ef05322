"""Define-by-run reverse-mode differentiation over float64 matrices.

Every :class:`Value` holds a 2-D float64 array.  Operations build a fresh
graph on each forward pass; :func:`backward` walks it in reverse
topological order.  Broadcasting follows numpy rules and gradients are
summed back to the parent's shape.
"""

import threading

import numpy as np

from ..errors import ShapeError, UsageError
from .special import digamma as _digamma
from .special import lgamma as _lgamma
from .special import trigamma as _trigamma

__all__ = [
    "Value",
    "as_value",
    "backward",
    "concat",
    "matmul",
    "relu",
    "exp",
    "log",
    "lgamma",
    "digamma",
    "clamp",
    "reshape",
    "slice_cols",
    "vsum",
    "mean",
    "zero_grad",
    "no_grad",
    "record_relu_inputs",
]

_local = threading.local()


class Value:
    """A node in the differentiation graph."""

    __slots__ = ("data", "grad", "op", "parents", "requires_grad", "_backward")
    __array_ufunc__ = None  # ndarray <op> Value dispatches to Value's reflected operators

    def __init__(self, data, requires_grad=False, op="leaf", parents=(), backward_fn=None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"Value data must be at most 2-D, got shape {arr.shape}")
        self.data = arr
        self.grad = np.zeros_like(arr)
        self.op = op
        self.parents = parents
        self.requires_grad = requires_grad
        self._backward = backward_fn

    @property
    def shape(self):
        return self.data.shape

    @property
    def is_leaf(self):
        return not self.parents

    def item(self):
        if self.data.size != 1:
            raise UsageError(f"item() needs a single element, shape is {self.shape}")
        return float(self.data[0, 0])

    def __repr__(self):
        return f"Value(shape={self.shape}, op={self.op!r})"

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

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __pow__(self, exponent):
        if exponent != 2:
            raise UsageError("only squaring is supported")
        return mul(self, self)

    def relu(self):
        return relu(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sum(self, axis=None):
        return vsum(self, axis)

    def mean(self):
        return mean(self)

    def clamp(self, lo, hi):
        return clamp(self, lo, hi)

    def reshape(self, rows, cols):
        return reshape(self, rows, cols)


def as_value(x):
    return x if isinstance(x, Value) else Value(x)


class no_grad:
    """Within this context operations record no graph (pure forward evaluation)."""

    def __enter__(self):
        self._prev = getattr(_local, "no_grad", False)
        _local.no_grad = True

    def __exit__(self, *exc):
        _local.no_grad = self._prev
        return False


def _wrap(data, op, parents=(), backward_fn=None):
    # ops always hand over a fresh 2-D float64 array, so skip the copy in __init__
    v = Value.__new__(Value)
    v.data = data
    v.grad = np.zeros_like(data)
    v.op = op
    v.parents = parents
    v.requires_grad = bool(parents)
    v._backward = backward_fn
    return v


def _node(data, parents, op, backward_fn):
    if getattr(_local, "no_grad", False) or not any(p.requires_grad for p in parents):
        return _wrap(data, op)
    return _wrap(data, op, parents, backward_fn)


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    for axis, (g, s) in enumerate(zip(grad.shape, shape)):
        if s == 1 and g != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b):
    a, b = as_value(a), as_value(b)
    out_data = a.data + b.data
    return _node(
        out_data,
        (a, b),
        "add",
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b):
    a, b = as_value(a), as_value(b)
    return _node(
        a.data - b.data,
        (a, b),
        "sub",
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b):
    a, b = as_value(a), as_value(b)
    return _node(
        a.data * b.data,
        (a, b),
        "mul",
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a, b):
    a, b = as_value(a), as_value(b)
    out = a.data / b.data
    return _node(
        out,
        (a, b),
        "div",
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)),
    )


def matmul(a, b):
    a, b = as_value(a), as_value(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    # one product per row, so a row's result never depends on the batch it sits in
    out = np.matmul(a.data[:, None, :], b.data)[:, 0, :]
    return _node(out, (a, b), "matmul", lambda g: (g @ b.data.T, a.data.T @ g))


class record_relu_inputs:
    """Context manager collecting the sign pattern of every relu input.

    Used by the gradient checker to detect evaluations that straddle a kink.
    """

    def __enter__(self):
        stack = getattr(_local, "relu_stack", None)
        if stack is None:
            stack = _local.relu_stack = []
        self.patterns = []
        stack.append(self.patterns)
        return self.patterns

    def __exit__(self, *exc):
        _local.relu_stack.pop()
        return False


def relu(a):
    a = as_value(a)
    stack = getattr(_local, "relu_stack", None)
    if stack:
        stack[-1].append(np.sign(a.data))
    mask = a.data > 0.0  # derivative at exactly 0 is 0
    return _node(np.maximum(a.data, 0.0), (a,), "relu", lambda g: (g * mask,))


def exp(a):
    a = as_value(a)
    out = np.exp(a.data)
    return _node(out, (a,), "exp", lambda g: (g * out,))


def log(a):
    a = as_value(a)
    return _node(np.log(a.data), (a,), "log", lambda g: (g / a.data,))


def lgamma(a):
    a = as_value(a)
    return _node(_lgamma(a.data), (a,), "lgamma", lambda g: (g * _digamma(a.data),))


def digamma(a):
    a = as_value(a)
    return _node(_digamma(a.data), (a,), "digamma", lambda g: (g * _trigamma(a.data),))


def clamp(a, lo, hi):
    a = as_value(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _node(np.clip(a.data, lo, hi), (a,), "clamp", lambda g: (g * inside,))


def vsum(a, axis=None):
    a = as_value(a)
    if axis is None:
        out = np.array([[a.data.sum()]])
    else:
        out = a.data.sum(axis=axis, keepdims=True)
    shape = a.shape
    return _node(out, (a,), "sum", lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(a):
    a = as_value(a)
    n = a.data.size
    shape = a.shape
    return _node(
        np.array([[a.data.mean()]]),
        (a,),
        "mean",
        lambda g: (np.full(shape, g[0, 0] / n),),
    )


def reshape(a, rows, cols):
    a = as_value(a)
    shape = a.shape
    if rows * cols != a.data.size:
        raise ShapeError(f"cannot reshape {shape} into ({rows}, {cols})")
    return _node(a.data.reshape(rows, cols), (a,), "reshape", lambda g: (g.reshape(shape),))


def slice_cols(a, start, stop):
    a = as_value(a)
    shape = a.shape
    if not 0 <= start <= stop <= shape[1]:
        raise ShapeError(f"column slice [{start}:{stop}] out of range for {shape}")

    def back(g):
        full = np.zeros(shape)
        full[:, start:stop] = g
        return (full,)

    return _node(a.data[:, start:stop], (a,), "slice", back)


def concat(values, axis=1):
    values = [as_value(v) for v in values]
    if not values:
        raise UsageError("concat needs at least one value")
    data = np.concatenate([v.data for v in values], axis=axis)
    bounds = np.cumsum([0] + [v.shape[axis] for v in values])

    def back(g):
        if axis == 0:
            return tuple(g[bounds[i] : bounds[i + 1], :] for i in range(len(values)))
        return tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(values)))

    return _node(data, tuple(values), "concat", back)


def _topological(root):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in reversed(node.parents):
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss):
    """Accumulate d(loss)/d(leaf) into every reachable leaf's ``grad``.

    Interior gradients are reset on each call, leaf gradients are not, so
    calling twice without :func:`zero_grad` doubles the leaf gradients.
    """
    if not isinstance(loss, Value) or loss.data.size != 1:
        shape = loss.shape if isinstance(loss, Value) else type(loss).__name__
        raise UsageError(f"backward needs a scalar loss, got {shape}")
    if not loss.requires_grad:
        return
    order = _topological(loss)
    for node in order:
        if not node.is_leaf:
            node.grad = np.zeros_like(node.data)
    loss.grad = loss.grad + 1.0
    for node in reversed(order):
        if node.is_leaf:
            continue
        parent_grads = node._backward(node.grad)
        for parent, g in zip(node.parents, parent_grads):
            if parent.requires_grad:
                parent.grad = parent.grad + g


def zero_grad(params):
    for p in params:
        p.grad = np.zeros_like(p.data)
