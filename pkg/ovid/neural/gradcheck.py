"""Central finite-difference gradient checks"""

from typing import Callable

import numpy as np

from ovid.neural.tensor import Tensor, backward, topological_order, zero_grad

STEP = 1e-5


def numerical_gradient(f: Callable[[], Tensor], x: Tensor, h: float = STEP) -> np.ndarray:
    """d f() / d x by central differences; f must rebuild its graph on every call"""
    grad = np.zeros_like(x.value)
    flat = x.value.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        upper = float(f().value.sum())
        flat[i] = original - h
        lower = float(f().value.sum())
        flat[i] = original
        grad.reshape(-1)[i] = (upper - lower) / (2.0 * h)
    return grad


def analytic_gradient(f: Callable[[], Tensor], x: Tensor) -> np.ndarray:
    zero_grad([x])
    out = f()
    backward(out)
    return x.grad.copy()


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / (||a|| + ||b||), 0 when both vanish"""
    denominator = float(np.linalg.norm(a) + np.linalg.norm(b))
    if denominator == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b)) / denominator


def relu_margin(root: Tensor) -> float:
    """Smallest |input| over the ReLUs in root's graph; inf without any"""
    margins = [
        float(np.abs(node._parents[0].value).min())
        for node in topological_order(root)
        if node.op == "relu" and node._parents[0].value.size
    ]
    return min(margins, default=float("inf"))
