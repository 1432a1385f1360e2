"""Minimal reverse-mode automatic differentiation in float64."""

from . import ops
from .optim import Adam, AdamState, adam_step
from .random import make_rng, split
from .tensor import Tape, Tensor, backward, get_tape, no_grad, use_tape

__all__ = [
    "Adam", "AdamState", "Tape", "Tensor", "adam_step", "backward", "get_tape",
    "make_rng", "no_grad", "ops", "split", "use_tape",
]
