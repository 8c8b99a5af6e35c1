"""Reverse-mode autodiff on float64 numpy arrays.

Tensors form a computation graph as ops execute; ``Tensor.backward()``
linearizes the reachable subgraph into a ComputationTape and replays it
in reverse. Everything is float64 and deterministic: identical inputs
and op order give bit-identical results.
"""

from __future__ import annotations

import itertools
import threading
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

_uid_counter = itertools.count()

_state = threading.local()


def _grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


class no_grad:
    """Context manager that disables graph recording (inference mode)."""

    def __enter__(self):
        self._prev = _grad_enabled()
        _state.grad_enabled = False
        return self

    def __exit__(self, *exc):
        _state.grad_enabled = self._prev
        return False


class Tensor:
    """A float64 n-d array with an optional gradient buffer.

    ``data`` is always a C-contiguous float64 array with ndim >= 1 (scalars
    are stored as shape ``(1,)``). ``grad`` is allocated lazily during
    backward and always matches ``data``'s shape.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op", "uid")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        self.data = np.ascontiguousarray(arr)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._op: str = "leaf"
        self.uid = next(_uid_counter)

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def zeros(shape, requires_grad=False) -> "Tensor":
        return Tensor(np.zeros(shape, dtype=np.float64), requires_grad)

    @staticmethod
    def ones(shape, requires_grad=False) -> "Tensor":
        return Tensor(np.ones(shape, dtype=np.float64), requires_grad)

    @staticmethod
    def from_op(data: np.ndarray, parents: Sequence["Tensor"], op: str,
                backward: Callable[[np.ndarray], None]) -> "Tensor":
        """Wrap an op result, wiring graph edges when recording is on."""
        out = Tensor.__new__(Tensor)
        arr = data if data.dtype == np.float64 else data.astype(np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        out.data = np.ascontiguousarray(arr)
        out.grad = None
        out.uid = next(_uid_counter)
        if _grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
            out._op = op
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
            out._op = op
        return out

    # -- basic protocol --------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g.reshape(self.data.shape)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"

    def backward(self):
        """Backpropagate from this scalar through the recorded graph."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar (size-1) tensor")
        if not self.requires_grad:
            raise ValueError("backward() on a tensor that does not require grad")
        tape = ComputationTape.trace(self)
        tape.run(self)

    # -- operator sugar (implemented in ops.py, patched below) ----------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes or None)


class ComputationTape:
    """Ordered record of the ops that produced a value.

    ``entries`` holds ``(op_name, input_uids, output_uid, tensor)`` in
    forward (topological) order; ``run`` replays backward functions in
    reverse order, visiting each node exactly once.
    """

    def __init__(self, entries):
        self.entries = entries

    @staticmethod
    def trace(root: Tensor) -> "ComputationTape":
        """Linearize the graph reachable from ``root`` in topological order."""
        entries = []
        visited = set()
        # Iterative post-order DFS; recursion would overflow on long chains.
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if node.uid in visited:
                continue
            if expanded:
                visited.add(node.uid)
                if node._backward is not None:
                    entries.append((node._op, tuple(p.uid for p in node._parents), node.uid, node))
            else:
                stack.append((node, True))
                for p in node._parents:
                    if p.uid not in visited and p.requires_grad:
                        stack.append((p, False))
        return ComputationTape(entries)

    def __len__(self):
        return len(self.entries)

    def run(self, root: Tensor):
        """Seed root.grad with ones and replay backward fns in reverse."""
        root.accumulate_grad(np.ones_like(root.data))
        for _, _, _, node in reversed(self.entries):
            if node.grad is not None:
                node._backward(node.grad)


TensorLike = Union[Tensor, float, int, np.ndarray]


def _as_tensor(x: TensorLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum grad over axes that were broadcast up from ``shape``."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- elementwise arithmetic ----------------------------------------------------

def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape))

    return Tensor.from_op(out_data, (a, b), "add", backward)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data - b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(-_unbroadcast(g, b.shape))

    return Tensor.from_op(out_data, (a, b), "sub", backward)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.shape))

    return Tensor.from_op(out_data, (a, b), "mul", backward)


def div(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data / b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return Tensor.from_op(out_data, (a, b), "div", backward)


def neg(a: Tensor) -> Tensor:
    def backward(g):
        a.accumulate_grad(-g)

    return Tensor.from_op(-a.data, (a,), "neg", backward)


def power(a: Tensor, exponent: float) -> Tensor:
    e = float(exponent)
    out_data = a.data ** e

    def backward(g):
        a.accumulate_grad(g * e * a.data ** (e - 1.0))

    return Tensor.from_op(out_data, (a,), "pow", backward)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def backward(g):
        a.accumulate_grad(g * out_data)

    return Tensor.from_op(out_data, (a,), "exp", backward)


def log(a: Tensor) -> Tensor:
    out_data = np.log(a.data)

    def backward(g):
        a.accumulate_grad(g / a.data)

    return Tensor.from_op(out_data, (a,), "log", backward)


def sqrt(a: Tensor) -> Tensor:
    out_data = np.sqrt(a.data)

    def backward(g):
        a.accumulate_grad(g * 0.5 / out_data)

    return Tensor.from_op(out_data, (a,), "sqrt", backward)


def absolute(a: Tensor) -> Tensor:
    out_data = np.abs(a.data)
    sign = np.sign(a.data)

    def backward(g):
        a.accumulate_grad(g * sign)

    return Tensor.from_op(out_data, (a,), "abs", backward)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    out_data = np.where(mask, a.data, 0.0)

    def backward(g):
        a.accumulate_grad(g * mask)

    return Tensor.from_op(out_data, (a,), "relu", backward)


def silu(a: Tensor) -> Tensor:
    """x * sigmoid(x); smooth everywhere, which keeps gradient checks clean."""
    x = a.data
    s = np.empty_like(x)
    pos = x >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    s[~pos] = ex / (1.0 + ex)
    out_data = x * s

    def backward(g):
        a.accumulate_grad(g * (s + x * s * (1.0 - s)))

    return Tensor.from_op(out_data, (a,), "silu", backward)


def sigmoid(a: Tensor) -> Tensor:
    # Split by sign for numerical stability; output is strictly in (0, 1)
    # for all finite float64 inputs after the clip below.
    x = a.data
    out_data = np.empty_like(x)
    pos = x >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out_data[~pos] = ex / (1.0 + ex)
    tiny = np.finfo(np.float64).tiny
    np.clip(out_data, tiny, 1.0 - np.finfo(np.float64).epsneg, out=out_data)

    def backward(g):
        a.accumulate_grad(g * out_data * (1.0 - out_data))

    return Tensor.from_op(out_data, (a,), "sigmoid", backward)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def backward(g):
        a.accumulate_grad(g * (1.0 - out_data * out_data))

    return Tensor.from_op(out_data, (a,), "tanh", backward)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    out_data = np.clip(a.data, lo, hi)
    mask = (a.data >= lo) & (a.data <= hi)

    def backward(g):
        a.accumulate_grad(g * mask)

    return Tensor.from_op(out_data, (a,), "clamp", backward)


def maximum(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = np.maximum(a.data, b.data)

    def backward(g):
        # ties split evenly so the subgradient stays symmetric
        ga = np.where(a.data > b.data, 1.0, np.where(a.data == b.data, 0.5, 0.0))
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * ga, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * (1.0 - ga), b.shape))

    return Tensor.from_op(out_data, (a, b), "maximum", backward)


def minimum(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = np.minimum(a.data, b.data)

    def backward(g):
        ga = np.where(a.data < b.data, 1.0, np.where(a.data == b.data, 0.5, 0.0))
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * ga, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * (1.0 - ga), b.shape))

    return Tensor.from_op(out_data, (a, b), "minimum", backward)


def max_reduce(a: Tensor, axis: int) -> Tensor:
    """Max over one axis; backward routes to the first argmax on ties."""
    out_data = np.max(a.data, axis=axis)
    idx = np.argmax(a.data, axis=axis)

    def backward(g):
        grad = np.zeros_like(a.data)
        np.put_along_axis(grad, np.expand_dims(idx, axis),
                          np.expand_dims(g, axis), axis)
        a.accumulate_grad(grad)

    return Tensor.from_op(out_data, (a,), "max_reduce", backward)


# -- reductions and shape ops ---------------------------------------------------

def tsum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out_data = np.sum(a.data, axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            grad = np.broadcast_to(g.reshape((1,) * a.ndim), a.shape)
        elif keepdims:
            grad = np.broadcast_to(g, a.shape)
        else:
            grad = np.broadcast_to(np.expand_dims(g, axis), a.shape)
        a.accumulate_grad(grad.copy())

    return Tensor.from_op(out_data, (a,), "sum", backward)


def tmean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    n = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    out_data = np.mean(a.data, axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            grad = np.broadcast_to(g.reshape((1,) * a.ndim), a.shape)
        elif keepdims:
            grad = np.broadcast_to(g, a.shape)
        else:
            grad = np.broadcast_to(np.expand_dims(g, axis), a.shape)
        a.accumulate_grad(grad / n)

    return Tensor.from_op(out_data, (a,), "mean", backward)


def reshape(a: Tensor, shape) -> Tensor:
    out_data = a.data.reshape(shape)

    def backward(g):
        a.accumulate_grad(g.reshape(a.shape))

    return Tensor.from_op(out_data, (a,), "reshape", backward)


def transpose(a: Tensor, axes=None) -> Tensor:
    out_data = np.ascontiguousarray(np.transpose(a.data, axes))
    inv = None if axes is None else np.argsort(axes)

    def backward(g):
        a.accumulate_grad(np.transpose(g, inv))

    return Tensor.from_op(out_data, (a,), "transpose", backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t.accumulate_grad(g[tuple(sl)])

    return Tensor.from_op(out_data, tuple(tensors), "concat", backward)


def take_rows(a: Tensor, indices) -> Tensor:
    """Select rows (axis 0) by integer index; scatter-adds on backward."""
    idx = np.asarray(indices, dtype=np.int64)
    out_data = a.data[idx]

    def backward(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, idx, g)
        a.accumulate_grad(grad)

    return Tensor.from_op(out_data, (a,), "take_rows", backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy matmul broadcasting over batch dims."""
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            a.accumulate_grad(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            b.accumulate_grad(_unbroadcast(gb, b.shape))

    return Tensor.from_op(out_data, (a, b), "matmul", backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Softmax along ``axis``; rows sum to 1 to within float64 roundoff."""
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g):
        dot = np.sum(g * out_data, axis=axis, keepdims=True)
        a.accumulate_grad(out_data * (g - dot))

    return Tensor.from_op(out_data, (a,), "softmax", backward)


def upsample2x(a: Tensor) -> Tensor:
    """Nearest-neighbor 2x upsample of a (C, H, W) tensor."""
    out_data = a.data.repeat(2, axis=1).repeat(2, axis=2)

    def backward(g):
        c, h2, w2 = g.shape
        a.accumulate_grad(g.reshape(c, h2 // 2, 2, w2 // 2, 2).sum(axis=(2, 4)))

    return Tensor.from_op(out_data, (a,), "upsample2x", backward)
