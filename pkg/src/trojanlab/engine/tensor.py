"""Autodiff core: a Tensor doubles as a node of the computation graph.

Each Tensor records the op kind that produced it, its parent nodes, the
cached forward value ("data") and, after a backward pass, the cached
gradient ("grad").  Graphs are built define-by-run, so they are acyclic by
construction.  All values are contiguous row-major float32.

Broadcasting is intentionally restricted: ``add`` supports bias-style
broadcasting of its second argument, everything else requires exact shape
matches or an explicit :func:`broadcast_to`.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np


class EngineError(Exception):
    """Base class for tensor-engine errors."""


class ShapeError(EngineError):
    """Raised when operand shapes are incompatible; names the op and dims."""


class GraphError(EngineError):
    """Raised on graph misuse, e.g. backward on a non-scalar."""


def _as_f32(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim == 0:
        return arr  # ascontiguousarray would promote 0-d to 1-d
    return np.ascontiguousarray(arr)


class Tensor:
    """A graph node holding a float32 array and reverse-mode plumbing.

    ``op`` names the operation that produced the node ("leaf" for inputs and
    parameters), ``parents`` are its input nodes, and ``_backward`` is the
    closure that routes this node's gradient into its parents.
    """

    __slots__ = ("data", "grad", "requires_grad", "op", "parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        op: str = "leaf",
        parents: tuple = (),
    ):
        self.data = _as_f32(data)
        if self.data.size == 0:
            raise ShapeError(f"{op}: empty tensor with shape {self.data.shape}")
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self.op = op
        self.parents = parents
        self._backward: Callable[[], None] = _noop

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(op={self.op!r}, shape={self.data.shape}{flag})"

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item: tensor has {self.data.size} elements, expected 1")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def accumulate_grad(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise ShapeError(
                f"{self.op}: gradient shape {g.shape} != value shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = g.astype(np.float32, copy=True)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar node.

        Accumulates gradients into every reachable node with
        ``requires_grad``; leaves without it are untouched.
        """
        if self.data.size != 1:
            raise GraphError(
                f"backward: root must be scalar, got shape {self.data.shape}"
            )
        if not self.requires_grad:
            raise GraphError(
                "backward: no tensor in this graph requires gradients"
            )
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node.parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.accumulate_grad(np.ones_like(self.data))
        for node in reversed(order):
            if node.grad is not None:
                node._backward()

    # Operator sugar; the full set lives in module-level functions.
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _coerce(other))


def _noop() -> None:
    return None


def _coerce(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float32))


def _result(data: np.ndarray, op: str, parents: Sequence[Tensor]) -> Tensor:
    requires = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=requires, op=op, parents=tuple(parents))


def _bias_reduce(g: np.ndarray, target_shape: tuple) -> np.ndarray:
    """Sum a gradient down to a bias-broadcast operand's shape."""
    extra = g.ndim - len(target_shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(target_shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return np.ascontiguousarray(g, dtype=np.float32)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add. ``b`` may broadcast into ``a`` (bias-add only)."""
    if a.shape != b.shape:
        try:
            shape = np.broadcast_shapes(a.shape, b.shape)
        except ValueError:
            shape = None
        if shape != a.shape:
            raise ShapeError(
                f"add: shapes {a.shape} and {b.shape} do not bias-broadcast"
            )
    out_data = a.data + b.data
    out = _result(out_data, "add", (a, b))

    def _bw():
        g = out.grad
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g if b.shape == g.shape else _bias_reduce(g, b.shape))

    out._backward = _bw
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape and b.size != 1 and a.size != 1:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} differ")
    out = _result(a.data - b.data, "sub", (a, b))

    def _bw():
        g = out.grad
        if a.requires_grad:
            a.accumulate_grad(g if a.shape == g.shape else _bias_reduce(g, a.shape))
        if b.requires_grad:
            gb = -g
            b.accumulate_grad(gb if b.shape == g.shape else _bias_reduce(gb, b.shape))

    out._backward = _bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; shapes must match exactly or one side is scalar."""
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")
    out = _result(a.data * b.data, "mul", (a, b))

    def _bw():
        g = out.grad
        if a.requires_grad:
            ga = g * b.data
            a.accumulate_grad(ga if a.shape == ga.shape else _bias_reduce(ga, a.shape))
        if b.requires_grad:
            gb = g * a.data
            b.accumulate_grad(gb if b.shape == gb.shape else _bias_reduce(gb, b.shape))

    out._backward = _bw
    return out


def neg(a: Tensor) -> Tensor:
    out = _result(-a.data, "neg", (a,))

    def _bw():
        if a.requires_grad:
            a.accumulate_grad(-out.grad)

    out._backward = _bw
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul: expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    out = _result(a.data @ b.data, "matmul", (a, b))

    def _bw():
        g = out.grad
        if a.requires_grad:
            a.accumulate_grad(np.ascontiguousarray(g @ b.data.T))
        if b.requires_grad:
            b.accumulate_grad(np.ascontiguousarray(a.data.T @ g))

    out._backward = _bw
    return out


def reshape(a: Tensor, shape: Iterable[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: {a.shape} -> {shape}: {exc}") from None
    out = _result(np.ascontiguousarray(data), "reshape", (a,))

    def _bw():
        if a.requires_grad:
            a.accumulate_grad(out.grad.reshape(a.shape))

    out._backward = _bw
    return out


def tensor_sum(a: Tensor, axis: Optional[int] = None) -> Tensor:
    """Sum over one axis, or over everything when ``axis`` is None."""
    out_data = a.data.sum(axis=axis, dtype=np.float32)
    out = _result(np.asarray(out_data), "sum", (a,))

    def _bw():
        g = out.grad
        if not a.requires_grad:
            return
        if axis is None:
            a.accumulate_grad(np.full(a.shape, float(g.reshape(())), dtype=np.float32))
        else:
            a.accumulate_grad(
                np.ascontiguousarray(
                    np.broadcast_to(np.expand_dims(g, axis), a.shape)
                ).astype(np.float32)
            )

    out._backward = _bw
    return out


def mean(a: Tensor, axis: Optional[int] = None) -> Tensor:
    n = a.size if axis is None else a.shape[axis]
    return mul(tensor_sum(a, axis=axis), Tensor(np.float32(1.0 / n)))


def exp(a: Tensor) -> Tensor:
    out = _result(np.exp(a.data), "exp", (a,))

    def _bw():
        if a.requires_grad:
            a.accumulate_grad(out.grad * out.data)

    out._backward = _bw
    return out


def log(a: Tensor) -> Tensor:
    out = _result(np.log(a.data), "log", (a,))

    def _bw():
        if a.requires_grad:
            a.accumulate_grad(out.grad / a.data)

    out._backward = _bw
    return out


def broadcast_to(a: Tensor, shape: Iterable[int]) -> Tensor:
    """Explicit broadcast; gradient sums over the expanded axes."""
    shape = tuple(int(s) for s in shape)
    try:
        data = np.broadcast_to(a.data, shape)
    except ValueError:
        raise ShapeError(f"broadcast_to: cannot broadcast {a.shape} to {shape}")
    out = _result(np.ascontiguousarray(data), "broadcast_to", (a,))

    def _bw():
        if a.requires_grad:
            a.accumulate_grad(_bias_reduce(out.grad, _padded_shape(a.shape, len(shape))).reshape(a.shape))

    out._backward = _bw
    return out


def _padded_shape(shape: tuple, ndim: int) -> tuple:
    return (1,) * (ndim - len(shape)) + shape


Number = Union[int, float]
