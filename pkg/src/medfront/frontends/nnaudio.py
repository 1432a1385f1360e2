"""nnAudio-style learnable frontend: STFT as two trainable kernel banks followed by
a trainable mel projection initialised from the triangular filterbank."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, ops
from ..signal import Waveform, frame_signal, window
from .config import FeatureMap, FrontendConfig
from .mel import mel_center_frequencies, mel_filterbank_matrix


@dataclass
class NnAudioParams:
    cos_bank: Tensor  # (n_fft // 2 + 1, window_samples)
    sin_bank: Tensor
    mel_weights: Tensor  # (n_filters, n_fft // 2 + 1)

    def tensors(self) -> dict[str, Tensor]:
        return {"cos_bank": self.cos_bank, "sin_bank": self.sin_bank, "mel_weights": self.mel_weights}

    def clamp_(self, cfg: FrontendConfig) -> None:
        pass


def init_nnaudio(cfg: FrontendConfig, n_fft: int | None = None) -> NnAudioParams:
    n_fft = cfg.fft_size if n_fft is None else n_fft
    win = cfg.window_samples
    k = np.arange(n_fft // 2 + 1)[:, None]
    n = np.arange(win)[None, :]
    angle = 2 * np.pi * k * n / n_fft
    w = window(cfg.window_kind, win)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fb = mel_filterbank_matrix(cfg, n_fft)
    return NnAudioParams(
        cos_bank=Tensor(w * np.cos(angle), requires_grad=True, name="cos_bank"),
        sin_bank=Tensor(w * np.sin(angle), requires_grad=True, name="sin_bank"),
        mel_weights=Tensor(fb, requires_grad=True, name="mel_weights"),
    )


def nnaudio_forward(samples: np.ndarray, p: NnAudioParams, cfg: FrontendConfig) -> Tensor:
    """(B, N) signals -> (B, T, C) log of the (non-negative) learned mel projection."""
    frames = frame_signal(np.atleast_2d(samples), cfg.window_samples, cfg.hop_samples)
    re = ops.matmul(frames, ops.transpose(p.cos_bank))
    im = ops.matmul(frames, ops.transpose(p.sin_bank))
    power = ops.add(ops.mul(re, re), ops.mul(im, im))
    mel = ops.relu(ops.matmul(power, ops.transpose(p.mel_weights)))
    return ops.log(mel, cfg.log_eps)


def nnaudio_frontend(w: Waveform, p: NnAudioParams, cfg: FrontendConfig) -> FeatureMap:
    if w.sample_rate != cfg.sample_rate:
        raise ValueError(f"waveform at {w.sample_rate} Hz, frontend configured for {cfg.sample_rate} Hz")
    out = nnaudio_forward(w.samples[None, :], p, cfg)
    return FeatureMap(out.values[0], cfg.frame_rate, mel_center_frequencies(cfg))
