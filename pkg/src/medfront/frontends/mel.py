"""Fixed log-mel filterbank frontend."""

from __future__ import annotations

import warnings

import numpy as np

from ..signal import Waveform, fft, frame_signal, window
from .config import FeatureMap, FrontendConfig


def hz_to_mel(f):
    """HTK mel scale."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("frequency must be non-negative")
    return 2595.0 * np.log10(1.0 + f / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_points(cfg: FrontendConfig) -> np.ndarray:
    """``n_filters + 2`` frequencies equally spaced in mel, first = fmin, last = fmax."""
    mels = np.linspace(hz_to_mel(cfg.fmin_hz), hz_to_mel(cfg.fmax_hz), cfg.n_filters + 2)
    pts = mel_to_hz(mels)
    pts[0], pts[-1] = cfg.fmin_hz, cfg.fmax_hz
    return pts


def mel_center_frequencies(cfg: FrontendConfig) -> np.ndarray:
    return mel_points(cfg)[1:-1]


def triangle(freqs, lo: float, center: float, hi: float) -> np.ndarray:
    freqs = np.asarray(freqs, dtype=np.float64)
    rise = (freqs - lo) / (center - lo)
    fall = (hi - freqs) / (hi - center)
    return np.maximum(0.0, np.minimum(rise, fall))


def mel_filterbank_matrix(cfg: FrontendConfig, n_fft: int | None = None) -> np.ndarray:
    """Peak-normalised triangular filters, shape (n_filters, n_fft // 2 + 1).

    Warns when the FFT grid is too coarse for some triangles to catch any bin.
    """
    n_fft = cfg.fft_size if n_fft is None else n_fft
    bins = np.arange(n_fft // 2 + 1) * cfg.sample_rate / n_fft
    pts = mel_points(cfg)
    fb = np.stack([triangle(bins, pts[m], pts[m + 1], pts[m + 2]) for m in range(cfg.n_filters)])
    empty = np.flatnonzero(fb.max(axis=1) == 0)
    if empty.size:
        warnings.warn(
            f"{empty.size} of {cfg.n_filters} mel filters cover no FFT bin at n_fft={n_fft} "
            f"(first empty row {empty[0]}); those channels are constant",
            stacklevel=2,
        )
    return fb


def power_frames(samples: np.ndarray, cfg: FrontendConfig) -> np.ndarray:
    """|STFT|^2 of (..., N) samples -> (..., n_frames, n_fft // 2 + 1)."""
    win = cfg.window_samples
    frames = frame_signal(samples, win, cfg.hop_samples) * window(cfg.window_kind, win)
    spec = fft(frames, cfg.fft_size)[..., : cfg.fft_size // 2 + 1]
    return spec.real ** 2 + spec.imag ** 2


def log_mel(samples: np.ndarray, cfg: FrontendConfig, fb: np.ndarray | None = None) -> np.ndarray:
    """log(M |STFT|^2 + eps) for a batch of equal-length signals."""
    if fb is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fb = mel_filterbank_matrix(cfg)
    return np.log(power_frames(samples, cfg) @ fb.T + cfg.log_eps)


def mel_frontend(w: Waveform, cfg: FrontendConfig) -> FeatureMap:
    if w.sample_rate != cfg.sample_rate:
        raise ValueError(f"waveform at {w.sample_rate} Hz, frontend configured for {cfg.sample_rate} Hz")
    return FeatureMap(log_mel(w.samples, cfg), cfg.frame_rate, mel_center_frequencies(cfg))
