"""DSP primitives: FFT, STFT, Butterworth band-pass cascades, resampling.

Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.signal import resample_poly, sosfilt

from .errors import DesignError, SizingError

WINDOW_KINDS = ("hann", "hamming", "rectangular")


@dataclass
class Waveform:
    """Mono audio with its sample rate."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        self.sample_rate = int(self.sample_rate)
        if not np.all(np.isfinite(self.samples)):
            raise ValueError(f"waveform {self.source_id!r} contains NaN or Inf")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate


@dataclass
class BiquadCascade:
    """Second-order sections, one row per section as (b0, b1, b2, a1, a2); a0 = 1."""

    sections: np.ndarray
    order: int
    low_hz: float
    high_hz: float
    sample_rate: int

    @property
    def sos(self) -> np.ndarray:
        """Sections in scipy ``sos`` layout ``[b0, b1, b2, 1, a1, a2]``."""
        s = self.sections
        return np.column_stack([s[:, :3], np.ones(len(s)), s[:, 3:]])

    def poles(self) -> np.ndarray:
        return np.concatenate([np.roots([1.0, a1, a2]) for a1, a2 in self.sections[:, 3:]])

    def frequency_response(self, freqs_hz) -> np.ndarray:
        """Complex response H(e^{jw}) of the full cascade at the given frequencies."""
        z = np.exp(-2j * np.pi * np.asarray(freqs_hz, dtype=np.float64) / self.sample_rate)
        h = np.ones_like(z)
        for b0, b1, b2, a1, a2 in self.sections:
            h *= (b0 + b1 * z + b2 * z * z) / (1.0 + a1 * z + a2 * z * z)
        return h


@dataclass
class ComplexSpectrum:
    """One-sided STFT: ``frames`` has shape (n_frames, n_fft // 2 + 1)."""

    frames: np.ndarray
    n_fft: int
    hop_samples: int
    window_samples: int
    sample_rate: int = field(default=0)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def power(self) -> np.ndarray:
        return self.frames.real ** 2 + self.frames.imag ** 2


# --------------------------------------------------------------------------- FFT


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 << max(0, int(n) - 1).bit_length()


def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _radix2(a: np.ndarray, sign: float) -> np.ndarray:
    n = a.shape[-1]
    lead = a.shape[:-1]
    a = a[..., _bit_reversal(n)]
    m = 1
    while m < n:
        twiddle = np.exp(sign * 1j * np.pi * np.arange(m) / m)
        blocks = a.reshape(*lead, n // (2 * m), 2, m)
        even = blocks[..., 0, :]
        odd = blocks[..., 1, :] * twiddle
        a = np.concatenate([even + odd, even - odd], axis=-1).reshape(*lead, n)
        m *= 2
    return a


def _pad_to(x, n: int | None) -> tuple[np.ndarray, int]:
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim == 0:
        x = x.reshape(1)
    length = x.shape[-1]
    if n is None:
        n = next_power_of_two(length)
    if not is_power_of_two(n):
        raise SizingError(f"FFT length must be a power of two, got {n}")
    if length > n:
        raise SizingError(f"input length {length} exceeds FFT length {n}")
    if length < n:
        pad = [(0, 0)] * (x.ndim - 1) + [(0, n - length)]
        x = np.pad(x, pad)
    return x, n


def fft(x, n: int | None = None) -> np.ndarray:
    """Radix-2 DFT along the last axis, zero-padding the input to ``n`` points.

    ``n`` defaults to the next power of two of the input length.
    """
    a, _ = _pad_to(x, n)
    return _radix2(a, -1.0)


def ifft(X, n: int | None = None) -> np.ndarray:
    a, n = _pad_to(X, n)
    return _radix2(a, 1.0) / n


# -------------------------------------------------------------------------- STFT


def window(kind: str, length: int) -> np.ndarray:
    """Periodic analysis window of the given kind."""
    n = np.arange(length)
    if kind == "hann":
        return 0.5 - 0.5 * np.cos(2 * np.pi * n / length)
    if kind == "hamming":
        return 0.54 - 0.46 * np.cos(2 * np.pi * n / length)
    if kind == "rectangular":
        return np.ones(length)
    raise ValueError(f"unknown window kind {kind!r}; expected one of {WINDOW_KINDS}")


def ms_to_samples(ms: float, sample_rate: int) -> int:
    return int(round(ms * sample_rate / 1000.0))


def frame_count(n_samples: int, window_samples: int, hop_samples: int) -> int:
    if n_samples < window_samples:
        return 0
    return 1 + (n_samples - window_samples) // hop_samples


def frame_signal(samples: np.ndarray, window_samples: int, hop_samples: int) -> np.ndarray:
    """Full-window frames along the last axis -> (..., n_frames, window_samples) view."""
    samples = np.asarray(samples)
    if samples.shape[-1] < window_samples:
        raise SizingError(
            f"signal of {samples.shape[-1]} samples is shorter than one analysis window "
            f"({window_samples} samples); pad it with fit_duration first"
        )
    view = np.lib.stride_tricks.sliding_window_view(samples, window_samples, axis=-1)
    return view[..., ::hop_samples, :]


def stft(
    w: Waveform,
    window_ms: float = 30.0,
    hop_ms: float = 10.0,
    window_kind: str = "hann",
    n_fft: int | None = None,
) -> ComplexSpectrum:
    """One-sided short-time Fourier transform; only frames where a full window fits."""
    win = ms_to_samples(window_ms, w.sample_rate)
    hop = ms_to_samples(hop_ms, w.sample_rate)
    if win < 1 or hop < 1:
        raise SizingError(
            f"window {window_ms} ms / hop {hop_ms} ms is below one sample at {w.sample_rate} Hz"
        )
    if n_fft is None:
        n_fft = next_power_of_two(win)
    if n_fft < win:
        raise SizingError(f"n_fft={n_fft} is smaller than the window ({win} samples)")
    frames = frame_signal(w.samples, win, hop) * window(window_kind, win)
    spec = fft(frames, n_fft)[:, : n_fft // 2 + 1]
    return ComplexSpectrum(spec, n_fft, hop, win, w.sample_rate)


# ------------------------------------------------------------------- Butterworth


def design_butterworth_bandpass(
    order: int, low_hz: float, high_hz: float, sample_rate: int
) -> BiquadCascade:
    """Digital Butterworth band-pass of total order ``order`` as a biquad cascade.

    Analog prototype of order ``order // 2``, low-pass to band-pass transform around
    pre-warped edges, then the bilinear transform. Each section holds one conjugate
    pole pair with zeros at z = 1 and z = -1 and is scaled to unit gain at the
    (digital) centre frequency.
    """
    if order < 2 or order % 2:
        raise DesignError(f"band-pass order must be even and >= 2, got {order}")
    nyquist = sample_rate / 2.0
    if not 0 < low_hz < high_hz < nyquist:
        raise DesignError(
            f"need 0 < low_hz < high_hz < Nyquist ({nyquist} Hz), got [{low_hz}, {high_hz}]"
        )
    n = order // 2
    fs2 = 2.0 * sample_rate
    w_lo = fs2 * math.tan(math.pi * low_hz / sample_rate)
    w_hi = fs2 * math.tan(math.pi * high_hz / sample_rate)
    w0 = math.sqrt(w_lo * w_hi)
    bw = w_hi - w_lo

    k = np.arange(1, n + 1)
    proto = np.exp(1j * np.pi * (2 * k + n - 1) / (2 * n))
    # each prototype pole p maps to the roots of s^2 - p*bw*s + w0^2
    disc = np.sqrt((proto * bw) ** 2 - 4 * w0 ** 2 + 0j)
    analog = np.concatenate([(proto * bw + disc) / 2, (proto * bw - disc) / 2])
    digital = (fs2 + analog) / (fs2 - analog)

    upper = digital[digital.imag > 0]
    if len(upper) != n:
        raise DesignError("pole pairing failed; band edges too close to 0 or Nyquist")
    upper = upper[np.argsort(np.abs(upper))]

    center = 2 * math.atan(w0 / fs2)
    zc = np.exp(-1j * center)
    sections = []
    for p in upper:
        a1, a2 = -2.0 * p.real, abs(p) ** 2
        gain = abs((1.0 + a1 * zc + a2 * zc * zc) / (1.0 - zc * zc))
        sections.append((gain, 0.0, -gain, a1, a2))
    return BiquadCascade(np.array(sections), order, float(low_hz), float(high_hz), int(sample_rate))


def apply_filter(c: BiquadCascade, w: Waveform) -> Waveform:
    """Single causal pass through the cascade (transposed direct form II, zero state)."""
    if c.sample_rate != w.sample_rate:
        raise DesignError(
            f"filter designed for {c.sample_rate} Hz applied to a {w.sample_rate} Hz waveform"
        )
    return Waveform(sosfilt(c.sos, w.samples), w.sample_rate, w.source_id)


# ------------------------------------------------------------------- resampling

KAISER_BETA = 8.6
TAPS_PER_PHASE = 64
CUTOFF_FRACTION = 0.9


def kaiser_sinc_lowpass(up: int, down: int, taps_per_phase: int = TAPS_PER_PHASE) -> np.ndarray:
    """Anti-alias/anti-image filter at the upsampled rate, unit DC gain.

    Cut-off sits at ``CUTOFF_FRACTION`` of the smaller of the two Nyquist rates.
    """
    rate = max(up, down)
    length = taps_per_phase * rate + 1
    fc = CUTOFF_FRACTION / rate
    n = np.arange(length) - (length - 1) / 2
    h = fc * np.sinc(fc * n) * np.kaiser(length, KAISER_BETA)
    return h / h.sum()


def resample(w: Waveform, to_hz: int) -> Waveform:
    """Rational polyphase resampling; output length is ``round(len * to_hz / from_hz)``."""
    if to_hz <= 0 or int(to_hz) != to_hz:
        raise ValueError(f"target rate must be a positive integer, got {to_hz!r}")
    to_hz = int(to_hz)
    if to_hz == w.sample_rate:
        return Waveform(w.samples.copy(), w.sample_rate, w.source_id)
    ratio = Fraction(to_hz, w.sample_rate)
    up, down = ratio.numerator, ratio.denominator
    out_len = int(round(len(w) * to_hz / w.sample_rate))
    y = resample_poly(w.samples, up, down, window=kaiser_sinc_lowpass(up, down))
    if len(y) >= out_len:
        y = y[:out_len]
    else:
        y = np.pad(y, (0, out_len - len(y)))
    return Waveform(y, to_hz, w.source_id)


def fit_duration(w: Waveform, target_s: float) -> Waveform:
    """Truncate or zero-pad at the end to exactly ``round(target_s * sample_rate)`` samples."""
    if target_s <= 0:
        raise ValueError(f"target duration must be positive, got {target_s}")
    n = int(round(target_s * w.sample_rate))
    x = w.samples[:n]
    if len(x) < n:
        x = np.pad(x, (0, n - len(x)))
    return Waveform(x.copy(), w.sample_rate, w.source_id)
