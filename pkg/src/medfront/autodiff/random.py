"""Reproducible random streams.

All randomness comes from numpy's Philox-4x64 counter-based generator keyed by a
``SeedSequence``. Streams are split by spawning child sequences, so the same seed
yields the same init, shuffle order and dropout masks on every platform.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seq))


def split(seed: int, n: int) -> list[np.random.Generator]:
    """``n`` independent generators derived from ``seed``."""
    return [make_rng(child) for child in np.random.SeedSequence(int(seed)).spawn(n)]
