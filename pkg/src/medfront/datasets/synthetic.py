"""Seeded tone-vs-noise corpus used for smoke tests and zero-download runs.

Normal recordings carry short sinusoidal bursts at random frequencies inside
the band; abnormal recordings carry band-limited noise bursts. Both sit on a
faint white-noise floor.
"""

from __future__ import annotations

import numpy as np

from ..autodiff.random import make_rng
from ..signal import Waveform, apply_filter, design_butterworth_bandpass
from .segments import Segment

NOISE_FLOOR = 0.005


def _burst_envelope(n: int) -> np.ndarray:
    return np.hanning(n + 2)[1:-1]


def synthetic_recording(
    rng: np.random.Generator, label: str, sample_rate: int = 8000, duration_s: float = 2.0,
    band: tuple[float, float] = (120.0, 1800.0),
) -> Waveform:
    n = int(round(duration_s * sample_rate))
    x = NOISE_FLOOR * rng.standard_normal(n)
    lo, hi = band
    noise_filter = design_butterworth_bandpass(4, lo, hi, sample_rate) if label == "abnormal" else None
    for _ in range(int(rng.integers(1, 4))):
        length = int(rng.uniform(0.25, 0.6) * sample_rate)
        start = int(rng.integers(0, n - length))
        amp = rng.uniform(0.2, 0.8)
        if noise_filter is None:
            f = rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo))
            t = np.arange(length) / sample_rate
            burst = np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
        else:
            raw = Waveform(rng.standard_normal(length), sample_rate)
            burst = apply_filter(noise_filter, raw).samples
            burst /= np.sqrt(2.0) * max(burst.std(), 1e-12)
        x[start:start + length] += amp * _burst_envelope(length) * burst
    return Waveform(x, sample_rate, "synthetic")


def synthetic_corpus(
    n: int, seed: int, sample_rate: int = 8000, duration_s: float = 2.0,
    band: tuple[float, float] = (120.0, 1800.0),
) -> list[Segment]:
    """``n`` raw recordings, half of each class, in a seeded order."""
    if n < 2:
        raise ValueError(f"need at least 2 recordings, got {n}")
    root = np.random.SeedSequence(int(seed))
    order_seq, *children = root.spawn(n + 1)
    labels = np.array(["normal"] * (n - n // 2) + ["abnormal"] * (n // 2))
    labels = labels[make_rng(order_seq).permutation(n)]
    out = []
    for k, (label, child) in enumerate(zip(labels, children)):
        w = synthetic_recording(make_rng(child), str(label), sample_rate, duration_s, band)
        name = f"synthetic_{k:05d}"
        w = Waveform(w.samples, w.sample_rate, name)
        out.append(Segment(w, str(label), name, (0.0, w.duration_s), None))
    return out
