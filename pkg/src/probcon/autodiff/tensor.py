"""
Tape Tensors

A minimal reverse-mode automatic-differentiation engine over float64 numpy
buffers. Every operation on tensors that require gradients records its
parents and a vector-Jacobian closure; ``Tensor.backward`` walks the recorded
graph in reverse topological order and accumulates adjoints into the leaves.

A graph belongs to the thread that built it. ``no_grad`` is thread-local, so
separate threads may build and differentiate their own graphs concurrently.
"""

import threading
from contextlib import contextmanager
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
Operand = Union["Tensor", float, int, np.ndarray]
Axis = Optional[Union[int, Tuple[int, ...]]]

_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording in the current thread."""
    previous = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    squeeze = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if squeeze:
        grad = grad.sum(axis=squeeze, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A float64 array node on the autodiff tape.

    Attributes:
        data: The forward value
        grad: Accumulated adjoint (leaves only), ``None`` until a backward pass
        requires_grad: Whether gradients flow to or through this node
    """

    __array_priority__ = 100.0
    __array_ufunc__ = None

    def __init__(
        self,
        data: Union[np.ndarray, float, int, Sequence[float]],
        requires_grad: bool = False,
        parents: Tuple["Tensor", ...] = (),
        backward_fn: Optional[BackwardFn] = None,
        name: Optional[str] = None,
    ):
        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents = parents
        self._backward = backward_fn

    # ------------------------------------------------------------------ basics

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # ---------------------------------------------------------------- backward

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate d(self)/d(leaf) into every leaf that requires gradients.

        Args:
            grad: Seed adjoint; defaults to ones for a scalar output

        Raises:
            ValueError: If ``grad`` is omitted for a non-scalar tensor
        """
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() needs an explicit seed for non-scalar tensors")
            grad = np.ones_like(self.data)
        else:
            grad = np.broadcast_to(np.asarray(grad, dtype=np.float64), self.shape).copy()

        order = self._topological_order()
        adjoints: Dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(order):
            adjoint = adjoints.pop(id(node), None)
            if adjoint is None:
                continue
            if node.is_leaf:
                node.grad = adjoint.copy() if node.grad is None else node.grad + adjoint
                continue
            assert node._backward is not None
            for parent, parent_grad in zip(node._parents, node._backward(adjoint)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in adjoints:
                    adjoints[key] = adjoints[key] + parent_grad
                else:
                    adjoints[key] = parent_grad

    def _topological_order(self) -> List["Tensor"]:
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    # --------------------------------------------------------------- operators

    def __add__(self, other: Operand) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: Operand) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: Operand) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: Operand) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: Operand) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: Operand) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: Operand) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: Operand) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: Operand) -> "Tensor":
        return matmul(self, other)

    def __rmatmul__(self, other: Operand) -> "Tensor":
        return matmul(other, self)

    def __getitem__(self, index: object) -> "Tensor":
        return index_select(self, index)

    def sum(self, axis: Axis = None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Axis = None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def exp(self) -> "Tensor":
        return exp(self)

    def log(self) -> "Tensor":
        return log(self)

    def sqrt(self) -> "Tensor":
        return sqrt(self)


def as_tensor(value: Operand) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def make_node(data: np.ndarray, parents: Tuple[Tensor, ...], backward_fn: BackwardFn) -> Tensor:
    """Create an op output, recording the graph edge only when needed."""
    if grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, backward_fn=backward_fn)
    return Tensor(data)


# ---------------------------------------------------------------- elementwise


def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return make_node(a.data + b.data, (a, b), backward)


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return make_node(a.data - b.data, (a, b), backward)


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return make_node(a.data * b.data, (a, b), backward)


def div(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return unbroadcast(g / b.data, a.shape), unbroadcast(-g * out / b.data, b.shape)

    return make_node(out, (a, b), backward)


def neg(a: Operand) -> Tensor:
    a = as_tensor(a)
    return make_node(-a.data, (a,), lambda g: (-g,))


def scale(a: Operand, factor: float) -> Tensor:
    """Multiply by a constant (no gradient w.r.t. ``factor``)."""
    a = as_tensor(a)
    return make_node(a.data * factor, (a,), lambda g: (g * factor,))


def exp(a: Operand) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return make_node(out, (a,), lambda g: (g * out,))


def log(a: Operand) -> Tensor:
    a = as_tensor(a)
    return make_node(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a: Operand) -> Tensor:
    """Square root; the adjoint is zero where the input is zero."""
    a = as_tensor(a)
    out = np.sqrt(a.data)

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, g * 0.5 / safe, 0.0),)

    return make_node(out, (a,), backward)


def clip(a: Operand, low: float, high: float) -> Tensor:
    """Clamp into [low, high]; no gradient flows through clamped entries."""
    a = as_tensor(a)
    inside = (a.data >= low) & (a.data <= high)
    return make_node(np.clip(a.data, low, high), (a,), lambda g: (g * inside,))


# ----------------------------------------------------------------- reductions


def _expand_reduced(
    g: np.ndarray, shape: Tuple[int, ...], axis: Axis, keepdims: bool
) -> np.ndarray:
    if axis is not None and not keepdims:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(ax % len(shape) for ax in axes)
        for ax in sorted(axes):
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, shape)


def tsum(a: Operand, axis: Axis = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (_expand_reduced(g, a.shape, axis, keepdims).copy(),)

    return make_node(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), backward)


def mean(a: Operand, axis: Axis = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size / max(np.sum(a.data, axis=axis, keepdims=keepdims).size, 1)

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (_expand_reduced(g, a.shape, axis, keepdims) / count,)

    return make_node(np.mean(a.data, axis=axis, keepdims=keepdims), (a,), backward)


def dot(a: Operand, b: Operand) -> Tensor:
    """Sum of products over the last axis, broadcasting the leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1:] != b.shape[-1:]:
        raise ValueError(f"dot: last dimensions differ, {a.shape} vs {b.shape}")

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        g = g[..., None]
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return make_node(np.sum(a.data * b.data, axis=-1), (a, b), backward)


def matmul(a: Operand, b: Operand) -> Tensor:
    """Matrix product of operands with at least two dimensions.

    Raises:
        ValueError: On fewer than two dimensions or mismatched inner sizes
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul operands need at least two dimensions")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul: shape mismatch {a.shape} @ {b.shape}")

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        grad_a = g @ np.swapaxes(b.data, -1, -2)
        grad_b = np.swapaxes(a.data, -1, -2) @ g
        return unbroadcast(grad_a, a.shape), unbroadcast(grad_b, b.shape)

    return make_node(a.data @ b.data, (a, b), backward)


# ------------------------------------------------------------- shape handling


def reshape(a: Operand, shape: Tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    return make_node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def index_select(a: Operand, index: object) -> Tensor:
    """Numpy-style indexing (basic or advanced); repeated indices accumulate."""
    a = as_tensor(a)

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)  # type: ignore[arg-type]
        return (full,)

    return make_node(a.data[index], (a,), backward)  # type: ignore[index]


def concat(tensors: Sequence[Operand], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return tuple(np.split(g, splits, axis=axis))

    return make_node(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), backward)


def stack(tensors: Sequence[Operand], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]

    def backward(g: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return tuple(np.moveaxis(g, axis, 0))

    return make_node(np.stack([p.data for p in parts], axis=axis), tuple(parts), backward)


def broadcast_to(a: Operand, shape: Tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    return make_node(
        np.broadcast_to(a.data, shape).copy(), (a,), lambda g: (unbroadcast(g, a.shape),)
    )
