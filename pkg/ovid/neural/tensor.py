"""
Tensors with reverse-mode differentiation

Every operation records its parents and a closure that pushes the output
gradient into them; backward() replays the closures in reverse topological
order. Gradients accumulate, so one backward over a batch loss built from
per-example graphs leaves the summed gradients on the shared parameters.
"""

from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np


class Tensor:
    """A float64 array plus its gradient and the operation that produced it"""

    __slots__ = ("value", "grad", "op", "_parents", "_backward")

    def __init__(
        self,
        value,
        parents: Tuple["Tensor", ...] = (),
        backward: Optional[Callable[[np.ndarray], None]] = None,
        op: str = "",
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.op = op
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"

    def __add__(self, other):
        from ovid.neural.ops import add

        return add(self, _lift(other))

    __radd__ = __add__

    def __mul__(self, other):
        from ovid.neural.ops import mul

        return mul(self, _lift(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        from ovid.neural.ops import matmul

        return matmul(self, other)


class Parameter(Tensor):
    """
    A trainable tensor with a stable name

    kind is one of "weight", "bias" or "gain"; only weights enter the L2 penalty.
    """

    __slots__ = ("name", "kind")

    def __init__(self, name: str, value, kind: str = "weight"):
        super().__init__(value)
        self.name = name
        self.kind = kind

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(node) into every node of root's graph"""
    order = topological_order(root)
    root.grad = root.grad + np.ones_like(root.value)
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = np.zeros_like(p.value)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to shape"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad
