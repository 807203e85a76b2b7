"""Tape-based reverse-mode automatic differentiation over numpy arrays.

Every primitive returns a :class:`Tensor` whose ``_backward`` closure pushes
the upstream gradient into its parents. :func:`backward` orders the graph
reachable from a scalar loss topologically and replays the closures in
reverse, visiting each node exactly once.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "ShapeError",
    "Tensor",
    "Tape",
    "as_tensor",
    "backward",
    "grad",
    "matmul",
    "add",
    "sub",
    "mul",
    "scale",
    "tanh",
    "sigmoid",
    "relu",
    "concat",
    "take",
    "reshape",
    "flatten",
    "avg_pool_2d",
    "conv_2d",
    "tensor_sum",
    "sum_of_squares",
    "norm",
]


class ShapeError(ValueError):
    """Raised when a primitive receives incompatible operand shapes."""


class Tensor:
    """A float64 array plus the bookkeeping needed to differentiate through it."""

    __slots__ = ("data", "grad", "requires_grad", "name", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op}{label})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], op: str, fn) -> Tensor:
    out = Tensor(data)
    out.op = op
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = fn
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# elementwise and linear algebra


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)

    def fn(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), "add", fn)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)

    def fn(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))

    return _make(a.data - b.data, (a, b), "sub", fn)


def mul(a, b) -> Tensor:
    """Elementwise (Hadamard) product with numpy broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)

    def fn(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), "mul", fn)


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return _make(a.data * c, (a,), "scale", lambda g: _accumulate(a, g * c))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def fn(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _make(a.data @ b.data, (a, b), "matmul", fn)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _make(y, (a,), "tanh", lambda g: _accumulate(a, g * (1.0 - y * y)))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # split by sign to avoid overflow in exp
    x = a.data
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    return _make(y, (a,), "sigmoid", lambda g: _accumulate(a, g * y * (1.0 - y)))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _make(a.data * mask, (a,), "relu", lambda g: _accumulate(a, g * mask))


# ---------------------------------------------------------------------------
# shape manipulation


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: no operands")
    try:
        data = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        shapes = ", ".join(str(t.shape) for t in ts)
        raise ShapeError(f"concat: incompatible shapes {shapes} on axis {axis}") from None
    bounds = np.cumsum([0] + [t.shape[axis] for t in ts])

    def fn(g):
        for t, lo, hi in zip(ts, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                _accumulate(t, g[tuple(idx)])

    return _make(data, ts, "concat", fn)


def take(a, index) -> Tensor:
    """Basic-slicing view ``a[index]``; the gradient scatters back into place."""
    a = as_tensor(a)
    data = a.data[index]

    def fn(g):
        full = np.zeros_like(a.data)
        full[index] += g
        _accumulate(a, full)

    return _make(np.array(data, copy=True), (a,), "slice", fn)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {a.shape} into {tuple(shape)}") from None
    return _make(data, (a,), "reshape", lambda g: _accumulate(a, g.reshape(a.shape)))


def flatten(a) -> Tensor:
    """Collapse every axis but the leading (batch) one."""
    a = as_tensor(a)
    return reshape(a, (a.shape[0], -1))


# ---------------------------------------------------------------------------
# reductions


def tensor_sum(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.array(a.data.sum()), (a,), "sum", lambda g: _accumulate(a, np.broadcast_to(g, a.shape)))


def sum_of_squares(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.array(np.sum(a.data * a.data)), (a,), "sum_of_squares", lambda g: _accumulate(a, 2.0 * g * a.data))


def norm(a, axis: int = -1) -> Tensor:
    """Euclidean norm along ``axis``. The subgradient at the origin is taken as zero."""
    a = as_tensor(a)
    n = np.sqrt(np.sum(a.data * a.data, axis=axis))

    def fn(g):
        safe = np.where(n > 0, n, 1.0)
        ratio = np.where(n > 0, g / safe, 0.0)
        _accumulate(a, a.data * np.expand_dims(ratio, axis))

    return _make(n, (a,), "norm", fn)


# ---------------------------------------------------------------------------
# convolutional layers


def avg_pool_2d(x, k: int = 2) -> Tensor:
    """Non-overlapping ``k x k`` mean pooling over an NCHW tensor."""
    x = as_tensor(x)
    if x.ndim != 4 or x.shape[2] % k or x.shape[3] % k:
        raise ShapeError(f"avg_pool_2d: input {x.shape} not NCHW with sides divisible by {k}")
    n, c, h, w = x.shape
    y = x.data.reshape(n, c, h // k, k, w // k, k).mean(axis=(3, 5))

    def fn(g):
        up = np.repeat(np.repeat(g, k, axis=2), k, axis=3) / (k * k)
        _accumulate(x, up)

    return _make(y, (x,), "avg_pool_2d", fn)


def _pad_amount(k: int, padding: str) -> int:
    if padding == "valid":
        return 0
    if padding == "same":
        if k % 2 == 0:
            raise ShapeError(f"conv_2d: 'same' padding needs an odd kernel, got {k}")
        return k // 2
    raise ValueError(f"conv_2d: unknown padding {padding!r}")


def conv_2d(x, w, b=None, padding: str = "same") -> Tensor:
    """Stride-1 cross-correlation of an NCHW input with an OCkk kernel."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1] or w.shape[2] != w.shape[3]:
        raise ShapeError(f"conv_2d: incompatible shapes {x.shape} and {w.shape}")
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    p = _pad_amount(k, padding)
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p))) if p else x.data
    ho, wo = xp.shape[2] - k + 1, xp.shape[3] - k + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv_2d: kernel {w.shape} larger than input {x.shape}")
    cols = sliding_window_view(xp, (k, k), axis=(2, 3)).transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    wmat = w.data.reshape(o, c * k * k)
    out = (cols @ wmat.T).reshape(n, ho, wo, o).transpose(0, 3, 1, 2)
    parents: tuple[Tensor, ...] = (x, w)
    if b is not None:
        b = as_tensor(b)
        if b.shape != (o,):
            raise ShapeError(f"conv_2d: bias shape {b.shape} does not match {o} output channels")
        out = out + b.data[None, :, None, None]
        parents = (x, w, b)

    def fn(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, o)
        if w.requires_grad:
            _accumulate(w, (g2.T @ cols).reshape(w.shape))
        if b is not None and b.requires_grad:
            _accumulate(b, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            # input gradient = full correlation of g with the flipped, channel-swapped kernel
            q = k - 1 - p
            gp = np.pad(g, ((0, 0), (0, 0), (q, q), (q, q))) if q else g
            gcols = sliding_window_view(gp, (k, k), axis=(2, 3)).transpose(0, 2, 3, 1, 4, 5).reshape(n * h * wd, o * k * k)
            wflip = w.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3).reshape(c, o * k * k)
            _accumulate(x, (gcols @ wflip.T).reshape(n, h, wd, c).transpose(0, 3, 1, 2))

    return _make(np.ascontiguousarray(out), parents, "conv_2d", fn)


# ---------------------------------------------------------------------------
# reverse pass


class Tape:
    """Reverse-topological replay order for the graph under one loss tensor."""

    def __init__(self, loss: Tensor):
        self.loss = loss
        self.nodes = self._toposort(loss)

    @staticmethod
    def _toposort(root: Tensor) -> list[Tensor]:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        return order

    def run(self) -> None:
        self.loss.grad = np.ones_like(self.loss.data)
        for node in reversed(self.nodes):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def backward(loss: Tensor) -> Tape:
    """Populate ``.grad`` on every tensor that ``loss`` depends on."""
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    tape = Tape(loss)
    tape.run()
    return tape


def grad(loss: Tensor, params: Iterable[Tensor]) -> list[np.ndarray]:
    """Gradients of ``loss`` for ``params``; parameters the loss never touches get zeros."""
    params = list(params)
    for p in params:
        p.grad = None
    backward(loss)
    return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
