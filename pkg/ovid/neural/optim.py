"""
ADAM optimizer
"""

from typing import Dict, Sequence

import numpy as np

from ovid.neural.tensor import Parameter


class AdamState:
    """First/second moment estimates per parameter name and the step counter"""

    def __init__(
        self,
        params: Sequence[Parameter],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m: Dict[str, np.ndarray] = {p.name: np.zeros_like(p.value) for p in params}
        self.v: Dict[str, np.ndarray] = {p.name: np.zeros_like(p.value) for p in params}


def adam_step(params: Sequence[Parameter], state: AdamState) -> None:
    """Bias-corrected ADAM update of every parameter from its accumulated gradient"""
    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for p in params:
        m = state.m[p.name] = state.beta1 * state.m[p.name] + (1.0 - state.beta1) * p.grad
        v = state.v[p.name] = state.beta2 * state.v[p.name] + (1.0 - state.beta2) * p.grad**2
        p.value = p.value - state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
