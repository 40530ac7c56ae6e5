"""Reverse-mode automatic differentiation over float64 numpy arrays.

Every forward operation returns a new :class:`Tensor` and, while gradient
recording is enabled, attaches a closure that propagates the output gradient
to its inputs.  ``Tensor.backward()`` runs the closures once each, in reverse
topological order.  The graph is single-use: running backward a second time
through any already-consumed node raises, which catches training-loop bugs
where a stale loss is differentiated twice.

Single-writer discipline: one logical thread builds a graph and runs its
backward pass.  Tensors holding frozen parameters may be shared read-only
across threads for parallel evaluation.
"""

from __future__ import annotations

import contextlib

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "no_grad",
    "set_debug_checks",
    "count_ops",
    "forward_op",
    "OPS",
    "concat",
    "stack",
]


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


_grad_enabled = True
_debug_checks = False
_op_counts: dict[str, int] | None = None


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (forward values only)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def set_debug_checks(enabled: bool) -> None:
    """Toggle the non-finite output check run after every forward op."""
    global _debug_checks
    _debug_checks = bool(enabled)


@contextlib.contextmanager
def count_ops():
    """Accumulate an estimated scalar-operation count per op kind.

    Yields a dict that keeps filling while the block runs; read it after the
    block (or during) and sum the values for a total cost figure.
    """
    global _op_counts
    prev = _op_counts
    _op_counts = {} if prev is None else prev
    try:
        yield _op_counts
    finally:
        _op_counts = prev


def _count(op: str, flops: int) -> None:
    if _op_counts is not None:
        _op_counts[op] = _op_counts.get(op, 0) + int(flops)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A float64 n-d array with an optional gradient buffer.

    Attributes:
        data: the value, always float64.
        grad: accumulated gradient of the last backward pass, or None.
        requires_grad: whether backward should reach this tensor.
    """

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev", "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._backward = None
        self._prev: tuple[Tensor, ...] = ()
        self._consumed = False

    # -- bookkeeping ------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # -- graph ------------------------------------------------------------

    def backward(self) -> None:
        """Backpropagate from this scalar through the recorded graph."""
        if self.data.size != 1:
            raise ValueError(
                f"backward requires a scalar output, got shape {self.shape}"
            )
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack_ = [(self, False)]
        while stack_:
            node, expanded = stack_.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            if node._consumed:
                raise RuntimeError(
                    "graph already consumed by a previous backward pass; "
                    "build a fresh forward pass before differentiating again"
                )
            stack_.append((node, True))
            for parent in node._prev:
                if id(parent) not in visited:
                    stack_.append((parent, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()
                node._consumed = True
                node._backward = None
                node._prev = ()


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward, op: str) -> Tensor:
    if _debug_checks and not np.all(np.isfinite(data)):
        raise FloatingPointError(f"non-finite values in output of '{op}'")
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._prev = parents
        out._backward = backward
    return out


# -- elementwise ops --------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast")
    _count("add", data.size)
    out = _result(data, (a, b), None, "add")

    def backward():
        g = out.grad
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape))

    out._backward = backward if out.requires_grad else None
    return out


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} do not broadcast")
    _count("sub", data.size)
    out = _result(data, (a, b), None, "sub")

    def backward():
        g = out.grad
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g, b.shape))

    out._backward = backward if out.requires_grad else None
    return out


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"multiply: shapes {a.shape} and {b.shape} do not broadcast")
    _count("multiply", data.size)
    out = _result(data, (a, b), None, "multiply")

    def backward():
        g = out.grad
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.shape))

    out._backward = backward if out.requires_grad else None
    return out


def neg(a) -> Tensor:
    a = _lift(a)
    _count("neg", a.size)
    out = _result(-a.data, (a,), None, "neg")

    def backward():
        if a.requires_grad:
            a.accumulate_grad(-out.grad)

    out._backward = backward if out.requires_grad else None
    return out


# -- linear algebra ----------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(
            f"matmul: operands must be at least 2-d, got {a.shape} and {b.shape}"
        )
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(
            f"matmul: inner dimensions differ, {a.shape} vs {b.shape}"
        )
    data = a.data @ b.data
    _count("matmul", 2 * data.size * a.shape[-1])
    out = _result(data, (a, b), None, "matmul")

    def backward():
        g = out.grad
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            a.accumulate_grad(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            b.accumulate_grad(_unbroadcast(gb, b.shape))

    out._backward = backward if out.requires_grad else None
    return out


# -- shape ops ---------------------------------------------------------------


def reshape(a, shape) -> Tensor:
    a = _lift(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}")
    out = _result(data, (a,), None, "reshape")

    def backward():
        if a.requires_grad:
            a.accumulate_grad(out.grad.reshape(a.shape))

    out._backward = backward if out.requires_grad else None
    return out


def transpose(a, axes) -> Tensor:
    a = _lift(a)
    axes = tuple(axes)
    data = np.transpose(a.data, axes)
    out = _result(data, (a,), None, "transpose")
    inverse = tuple(np.argsort(axes))

    def backward():
        if a.requires_grad:
            a.accumulate_grad(np.transpose(out.grad, inverse))

    out._backward = backward if out.requires_grad else None
    return out


def swapaxes(a, i: int, j: int) -> Tensor:
    a = _lift(a)
    axes = list(range(a.ndim))
    axes[i], axes[j] = axes[j], axes[i]
    return transpose(a, axes)


def getitem(a, index) -> Tensor:
    a = _lift(a)
    data = a.data[index]
    out = _result(np.array(data, dtype=np.float64), (a,), None, "slice")

    def backward():
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            np.add.at(buf, index, out.grad)
            a.accumulate_grad(buf)

    out._backward = backward if out.requires_grad else None
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = tuple(_lift(t) for t in tensors)
    if not tensors:
        raise ShapeError("concat: need at least one tensor")
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(
            f"concat: shapes {[t.shape for t in tensors]} do not align on axis {axis}"
        )
    out = _result(data, tensors, None, "concat")
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward():
        g = out.grad
        index = [slice(None)] * g.ndim
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index[axis] = slice(start, stop)
                t.accumulate_grad(g[tuple(index)])

    out._backward = backward if out.requires_grad else None
    return out


def stack(tensors, axis: int = 0) -> Tensor:
    """Stack same-shape tensors along a new axis (concat of unsqueezed views)."""
    tensors = list(tensors)
    expanded = []
    for t in tensors:
        t = _lift(t)
        shape = list(t.shape)
        shape.insert(axis if axis >= 0 else axis + t.ndim + 1, 1)
        expanded.append(reshape(t, shape))
    return concat(expanded, axis=axis)


# -- reductions ---------------------------------------------------------------


def _expand_reduced(grad, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(grad.reshape((1,) * len(shape)), shape)
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(ax % len(shape) for ax in axes)
    if not keepdims:
        for ax in sorted(axes):
            grad = np.expand_dims(grad, ax)
    return np.broadcast_to(grad, shape)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)
    _count("sum", a.size)
    out = _result(np.asarray(data, dtype=np.float64), (a,), None, "sum")

    def backward():
        if a.requires_grad:
            a.accumulate_grad(
                _expand_reduced(out.grad, a.shape, axis, keepdims).copy()
            )

    out._backward = backward if out.requires_grad else None
    return out


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    _count("mean", a.size)
    out = _result(np.asarray(data, dtype=np.float64), (a,), None, "mean")
    count = a.size if axis is None else np.prod(
        [a.shape[ax % a.ndim] for ax in ((axis,) if isinstance(axis, int) else axis)]
    )

    def backward():
        if a.requires_grad:
            a.accumulate_grad(
                _expand_reduced(out.grad, a.shape, axis, keepdims) / count
            )

    out._backward = backward if out.requires_grad else None
    return out


# -- nonlinearities ------------------------------------------------------------


def sigmoid(a) -> Tensor:
    a = _lift(a)
    x = a.data
    data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    _count("sigmoid", 4 * a.size)
    out = _result(data, (a,), None, "sigmoid")

    def backward():
        if a.requires_grad:
            a.accumulate_grad(out.grad * data * (1.0 - data))

    out._backward = backward if out.requires_grad else None
    return out


def tanh(a) -> Tensor:
    a = _lift(a)
    data = np.tanh(a.data)
    _count("tanh", 4 * a.size)
    out = _result(data, (a,), None, "tanh")

    def backward():
        if a.requires_grad:
            a.accumulate_grad(out.grad * (1.0 - data * data))

    out._backward = backward if out.requires_grad else None
    return out


def softmax(a, axis: int = -1) -> Tensor:
    a = _lift(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)
    _count("softmax", 4 * a.size)
    out = _result(data, (a,), None, "softmax")

    def backward():
        if a.requires_grad:
            g = out.grad
            inner = (g * data).sum(axis=axis, keepdims=True)
            a.accumulate_grad(data * (g - inner))

    out._backward = backward if out.requires_grad else None
    return out


def layer_norm(a, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis to zero mean / unit variance, then affine."""
    a, gamma, beta = _lift(a), _lift(gamma), _lift(beta)
    n = a.shape[-1]
    if gamma.shape != (n,) or beta.shape != (n,):
        raise ShapeError(
            f"layer_norm: affine params must have shape ({n},), "
            f"got {gamma.shape} and {beta.shape}"
        )
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    data = xhat * gamma.data + beta.data
    _count("layer_norm", 8 * a.size)
    out = _result(data, (a, gamma, beta), None, "layer_norm")

    def backward():
        g = out.grad
        if gamma.requires_grad:
            gamma.accumulate_grad(_unbroadcast(g * xhat, gamma.shape))
        if beta.requires_grad:
            beta.accumulate_grad(_unbroadcast(g, beta.shape))
        if a.requires_grad:
            gx = g * gamma.data
            m1 = gx.mean(axis=-1, keepdims=True)
            m2 = (gx * xhat).mean(axis=-1, keepdims=True)
            a.accumulate_grad(inv * (gx - m1 - xhat * m2))

    out._backward = backward if out.requires_grad else None
    return out


# -- operator sugar ------------------------------------------------------------

Tensor.__add__ = lambda self, other: add(self, other)
Tensor.__radd__ = lambda self, other: add(other, self)
Tensor.__sub__ = lambda self, other: sub(self, other)
Tensor.__rsub__ = lambda self, other: sub(other, self)
Tensor.__mul__ = lambda self, other: mul(self, other)
Tensor.__rmul__ = lambda self, other: mul(other, self)
Tensor.__neg__ = lambda self: neg(self)
Tensor.__matmul__ = lambda self, other: matmul(self, other)
Tensor.__getitem__ = lambda self, index: getitem(self, index)
Tensor.reshape = lambda self, shape: reshape(self, shape)
Tensor.transpose = lambda self, axes: transpose(self, axes)
Tensor.swapaxes = lambda self, i, j: swapaxes(self, i, j)
Tensor.sum = lambda self, axis=None, keepdims=False: tsum(self, axis, keepdims)
Tensor.mean = lambda self, axis=None, keepdims=False: tmean(self, axis, keepdims)
Tensor.sigmoid = lambda self: sigmoid(self)
Tensor.tanh = lambda self: tanh(self)


# Primitive registry: one name per op kind, usable for generic dispatch and
# for test suites that sweep every primitive.
OPS = {
    "add": add,
    "sub": sub,
    "multiply": mul,
    "neg": neg,
    "matmul": matmul,
    "reshape": reshape,
    "transpose": transpose,
    "slice": getitem,
    "concat": concat,
    "sum": tsum,
    "mean": tmean,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "softmax": softmax,
    "layer_norm": layer_norm,
}


def forward_op(op_kind: str, *inputs, **kwargs) -> Tensor:
    """Apply a primitive by name; unknown kinds raise KeyError."""
    return OPS[op_kind](*inputs, **kwargs)
