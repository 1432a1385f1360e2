"""Central finite-difference gradient checking.

The scalar probed is ``sum(fn() * R)`` for a fixed random ``R``, so errors cannot
hide behind outputs whose plain sum is constant (softmax rows, normalised windows).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import ops
from .tensor import Tensor, backward, no_grad


def _projection(fn: Callable[[], Tensor], seed: int) -> np.ndarray:
    with no_grad():
        shape = fn().shape
    return np.random.default_rng(seed).uniform(0.5, 1.5, size=shape)


def numeric_grad(fn, param: Tensor, weights: np.ndarray, h: float = 1e-5) -> np.ndarray:
    base = param.values.copy()
    grad = np.zeros(base.size)
    with no_grad():
        for i in range(base.size):
            bumped = base.copy().reshape(-1)
            bumped[i] += h
            param.values = bumped.reshape(base.shape)
            plus = float(np.sum(fn().values * weights))
            bumped[i] -= 2 * h
            param.values = bumped.reshape(base.shape)
            minus = float(np.sum(fn().values * weights))
            grad[i] = (plus - minus) / (2 * h)
    param.values = base
    return grad.reshape(base.shape)


def analytic_grad(fn, params: Sequence[Tensor], weights: np.ndarray) -> list[np.ndarray]:
    for p in params:
        p.grad = None
    backward(ops.sum(ops.mul(fn(), weights)))
    return [p.grad if p.grad is not None else np.zeros_like(p.values) for p in params]


def max_relative_error(
    fn: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-5, seed: int = 0
) -> float:
    """Worst |analytic - numeric| / (|numeric| + 1e-8) over every element of ``params``."""
    weights = _projection(fn, seed)
    analytic = analytic_grad(fn, params, weights)
    worst = 0.0
    for p, a in zip(params, analytic):
        num = numeric_grad(fn, p, weights, h)
        err = np.abs(a - num) / (np.abs(num) + 1e-8)
        if err.size:
            worst = max(worst, float(err.max()))
    return worst
