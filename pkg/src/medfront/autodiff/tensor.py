"""Tensors recorded on an append-only tape, and reverse-mode backward."""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import NumericalError

_uids = itertools.count()


class Tensor:
    """Dense float64 array that may participate in gradient computation."""

    __array_priority__ = 100

    def __init__(self, values, requires_grad: bool = False, name: str | None = None):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self.uid = next(_uids)
        self.node_id: int | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    def numpy(self) -> np.ndarray:
        return self.values

    def item(self) -> float:
        return float(self.values.reshape(-1)[0]) if self.values.size == 1 else float(self.values)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # operator sugar; implementations live in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __pow__(self, exponent):
        from . import ops
        return ops.power(self, exponent)

    @property
    def T(self):
        from . import ops
        return ops.transpose(self)


@dataclass
class Node:
    kind: str
    inputs: tuple[Tensor, ...]
    output_uid: int
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tape:
    """Append-only record of operations; inputs of a node always precede it."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.enabled = True

    def __len__(self):
        return len(self.nodes)

    def record(self, kind, inputs, output: Tensor, backward) -> None:
        output.node_id = len(self.nodes)
        self.nodes.append(Node(kind, tuple(inputs), output.uid, backward))

    def clear(self) -> None:
        self.nodes.clear()


_local = threading.local()


def get_tape() -> Tape:
    tape = getattr(_local, "tape", None)
    if tape is None:
        tape = _local.tape = Tape()
    return tape


@contextmanager
def use_tape(tape: Tape):
    """Record onto ``tape`` inside the block (per thread)."""
    previous = getattr(_local, "tape", None)
    _local.tape = tape
    try:
        yield tape
    finally:
        _local.tape = previous


@contextmanager
def no_grad():
    tape = get_tape()
    previous = tape.enabled
    tape.enabled = False
    try:
        yield
    finally:
        tape.enabled = previous


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_output(kind: str, values, inputs: Sequence[Tensor], backward) -> Tensor:
    """Wrap an op result, checking finiteness and recording a node if needed."""
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"{kind} produced non-finite values")
    tape = get_tape()
    requires = tape.enabled and any(t.requires_grad for t in inputs)
    out = Tensor(values, requires_grad=requires)
    if requires:
        tape.record(kind, inputs, out, backward)
    return out


def backward(loss: Tensor, tape: Tape | None = None) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf that requires grad.

    The tape is walked in exact reverse order and cleared afterwards.
    """
    tape = tape or get_tape()
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.node_id is None or not tape.nodes:
        raise ValueError("loss was not recorded on the tape; nothing to differentiate")
    if loss.node_id >= len(tape.nodes) or tape.nodes[loss.node_id].output_uid != loss.uid:
        raise ValueError("loss does not belong to this tape")

    grads: dict[int, np.ndarray] = {loss.uid: np.ones_like(loss.values)}
    leaves: dict[int, Tensor] = {}
    for node in reversed(tape.nodes[: loss.node_id + 1]):
        g = grads.pop(node.output_uid, None)
        if g is None:
            continue
        input_grads = node.backward(g)
        for t, gi in zip(node.inputs, input_grads):
            if gi is None or not t.requires_grad:
                continue
            if gi.shape != t.shape:
                raise AssertionError(f"{node.kind}: gradient shape {gi.shape} != input shape {t.shape}")
            if t.uid in grads:
                grads[t.uid] = grads[t.uid] + gi
            else:
                grads[t.uid] = gi
            if t.node_id is None:
                leaves[t.uid] = t
    for uid, t in leaves.items():
        g = grads.get(uid)
        if g is None:
            continue
        t.grad = g.copy() if t.grad is None else t.grad + g
    tape.clear()
