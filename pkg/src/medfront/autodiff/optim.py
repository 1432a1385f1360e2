from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[int, np.ndarray] = field(default_factory=dict)
    v: dict[int, np.ndarray] = field(default_factory=dict)


def adam_step(params, state: AdamState) -> None:
    """One bias-corrected Adam update of every tensor in ``params``; grads are zeroed."""
    params = list(params)
    for p in params:
        if p.grad is None:
            raise ValueError(f"parameter {p.name or p.uid} has no gradient; run backward first")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p in params:
        g = p.grad
        m = state.m.get(p.uid)
        v = state.v.get(p.uid)
        if m is None:
            m = np.zeros_like(p.values)
            v = np.zeros_like(p.values)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[p.uid], state.v[p.uid] = m, v
        p.values = p.values - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.grad = None


class Adam:
    """Thin wrapper holding a parameter list and its :class:`AdamState`."""

    def __init__(self, params, lr=1e-5, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params: list[Tensor] = list(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        adam_step(self.params, self.state)
