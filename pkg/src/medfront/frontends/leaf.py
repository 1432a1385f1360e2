"""LEAF-style learnable frontend: Gabor filterbank, squared modulus, Gaussian
lowpass pooling and PCEN compression, all differentiable."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from ..autodiff import Tensor, ops
from ..autodiff.tensor import as_tensor, make_output
from ..signal import Waveform, window
from .config import FeatureMap, FrontendConfig
from .mel import mel_filterbank_matrix, mel_points

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
MIN_BANDWIDTH_HZ = 1e-3
MIN_ROOT = 0.1
MIN_DELTA = 1e-6
MIN_POOL_WIDTH = 1e-2


@dataclass
class LeafParams:
    center_hz: Tensor
    bandwidth: Tensor  # std of the Gaussian frequency response, Hz
    pool_width: Tensor  # std of the Gaussian pooling window, in half-window units
    alpha: Tensor
    delta: Tensor
    root: Tensor
    smooth: float = 0.04
    eps: float = 1e-6

    def tensors(self) -> dict[str, Tensor]:
        return {
            "center_hz": self.center_hz,
            "bandwidth": self.bandwidth,
            "pool_width": self.pool_width,
            "pcen_alpha": self.alpha,
            "pcen_delta": self.delta,
            "pcen_root": self.root,
        }

    def clamp_(self, cfg: FrontendConfig) -> None:
        """Project parameters back into their valid ranges (call after each update)."""
        nyquist = cfg.sample_rate / 2.0
        self.center_hz.values = np.clip(self.center_hz.values, 1e-3, nyquist - 1e-3)
        self.bandwidth.values = np.maximum(self.bandwidth.values, MIN_BANDWIDTH_HZ)
        self.pool_width.values = np.maximum(self.pool_width.values, MIN_POOL_WIDTH)
        self.alpha.values = np.maximum(self.alpha.values, 0.0)
        self.delta.values = np.maximum(self.delta.values, MIN_DELTA)
        self.root.values = np.maximum(self.root.values, MIN_ROOT)


def effective_mel_fwhm(cfg: FrontendConfig, resolution: int = 1 << 15) -> np.ndarray:
    """FWHM (Hz) of each mel channel's effective power response.

    A mel channel sees the triangle spread by the analysis window's power spectrum,
    so at low frequencies its width is set by the window rather than the triangle.
    Channels whose triangle catches no FFT bin get NaN.
    """
    n_fft = cfg.fft_size
    fs = cfg.sample_rate
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fb = mel_filterbank_matrix(cfg, n_fft)
    lag = np.abs(np.fft.fft(window(cfg.window_kind, cfg.window_samples), resolution)) ** 2
    step = resolution // n_fft
    grid = np.arange(resolution // 2 + 1) * fs / resolution
    # |W(f - f_k)|^2 on the fine grid for every FFT bin k
    idx = (np.arange(resolution // 2 + 1)[None, :] - step * np.arange(n_fft // 2 + 1)[:, None]) % resolution
    response = fb @ lag[idx]
    out = np.full(cfg.n_filters, np.nan)
    for c in np.flatnonzero(fb.max(axis=1) > 0):
        above = grid[response[c] >= response[c].max() / 2]
        out[c] = above.max() - above.min()
    return out


def window_time_spread(cfg: FrontendConfig) -> float:
    """Std of the squared analysis window, in half-window units."""
    w2 = window(cfg.window_kind, cfg.window_samples) ** 2
    n = np.arange(w2.size)
    p = w2 / w2.sum()
    mu = (p * n).sum()
    half = max((cfg.window_samples - 1) / 2.0, 0.5)
    return float(np.sqrt((p * (n - mu) ** 2).sum()) / half)


def init_leaf(cfg: FrontendConfig) -> LeafParams:
    """Mel-like initialisation.

    Centres sit on the mel filterbank peaks. Each Gabor's power response gets the
    FWHM of the matching mel channel's effective response (triangle base width for
    channels the FFT grid cannot resolve). Pooling windows take the time spread of
    the squared analysis window. PCEN starts at the configured alpha / delta / root.
    """
    pts = mel_points(cfg)
    centers = pts[1:-1]
    base = pts[2:] - pts[:-2]
    eff = effective_mel_fwhm(cfg)
    # power response |K|^2 has std bandwidth / sqrt(2)
    bandwidth = np.where(np.isnan(eff), base / FWHM_PER_SIGMA, eff * math.sqrt(2.0) / FWHM_PER_SIGMA)
    c = cfg.n_filters
    return LeafParams(
        center_hz=Tensor(centers, requires_grad=True, name="center_hz"),
        bandwidth=Tensor(bandwidth, requires_grad=True, name="bandwidth"),
        pool_width=Tensor(np.full(c, window_time_spread(cfg)), requires_grad=True, name="pool_width"),
        alpha=Tensor(np.full(c, cfg.pcen_alpha), requires_grad=True, name="pcen_alpha"),
        delta=Tensor(np.full(c, cfg.pcen_delta), requires_grad=True, name="pcen_delta"),
        root=Tensor(np.full(c, cfg.pcen_root), requires_grad=True, name="pcen_root"),
        smooth=cfg.pcen_smooth,
        eps=cfg.pcen_eps,
    )


def gabor_kernels(center_hz, bandwidth, length: int, sample_rate: int) -> tuple[Tensor, Tensor]:
    """Real and imaginary parts, each (n_filters, length), of centred Gabor kernels.

    k[n] = b * sqrt(2 pi) / fs * exp(-2 pi^2 b^2 n^2 / fs^2) * exp(j 2 pi f n / fs),
    n centred on the middle tap; the envelope sums to ~1 so the peak gain is ~1.
    """
    center_hz, bandwidth = as_tensor(center_hz), as_tensor(bandwidth)
    n = (np.arange(length) - (length - 1) / 2.0)[None, :]
    fc = ops.reshape(center_hz, (-1, 1))
    bw = ops.reshape(bandwidth, (-1, 1))
    env_scale = ops.mul(bw, math.sqrt(2 * math.pi) / sample_rate)
    env = ops.mul(env_scale, ops.exp(ops.mul(ops.mul(bw, bw), -2 * math.pi ** 2 * n ** 2 / sample_rate ** 2)))
    phase = ops.mul(fc, 2 * math.pi * n / sample_rate)
    return ops.mul(env, ops.cos(phase)), ops.mul(env, ops.sin(phase))


def gabor_kernel(center_hz: float, bandwidth: float, length: int, sample_rate: int) -> np.ndarray:
    if not 0 < center_hz < sample_rate / 2:
        raise ValueError(f"center_hz must lie in (0, Nyquist), got {center_hz}")
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    re, im = gabor_kernels([center_hz], [bandwidth], length, sample_rate)
    return re.values[0] + 1j * im.values[0]


def gaussian_pool_weights(pool_width, window_samples: int) -> Tensor:
    """(n_filters, window_samples) Gaussian windows; std = pool_width * half the window."""
    pool_width = as_tensor(pool_width)
    half = max((window_samples - 1) / 2.0, 0.5)
    t = ((np.arange(window_samples) - (window_samples - 1) / 2.0) / half)[None, :]
    ratio = ops.div(t, ops.reshape(pool_width, (-1, 1)))
    return ops.exp(ops.mul(ops.mul(ratio, ratio), -0.5))


def _overlap_add(frames: np.ndarray, hop: int, n: int) -> np.ndarray:
    """Inverse of framing: (C, T, W) -> (C, n) summing overlapping frames."""
    c, t, w = frames.shape
    out = np.zeros((c, max(n, (t + -(-w // hop)) * hop)))
    for i in range(0, w, hop):
        chunk = frames[:, :, i : i + hop]
        width = chunk.shape[2]
        block = out[:, i : i + t * hop].reshape(c, t, hop)
        block[:, :, :width] += chunk
    return out[:, :n]


def gabor_energy_pool(samples: np.ndarray, k_re, k_im, pool_w, hop: int) -> Tensor:
    """Fused Gabor convolution ('same' length), squared modulus and strided pooling.

    samples: (B, N) constant signals; k_re / k_im: (C, L) kernels; pool_w: (C, W).
    Returns (B, T, C) pooled energies. The filtered signals are recomputed in the
    backward pass instead of being kept, bounding memory to one signal at a time.
    """
    k_re, k_im, pool_w = as_tensor(k_re), as_tensor(k_im), as_tensor(pool_w)
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    b, n = samples.shape
    c, length = k_re.shape
    w = pool_w.shape[1]
    t = (n - w) // hop + 1
    if t < 1:
        raise ValueError(f"signal of {n} samples is shorter than the pooling window ({w})")
    off = length // 2
    nfft = sfft.next_fast_len(n + length - 1)
    spectra = sfft.fft(samples, nfft, axis=-1)
    kspec = sfft.fft(k_re.values + 1j * k_im.values, nfft, axis=-1)

    def filtered(i):
        y = sfft.ifft(spectra[i] * kspec, axis=-1)[:, off : off + n]
        return y, y.real ** 2 + y.imag ** 2

    def framed(energy):
        return np.lib.stride_tricks.sliding_window_view(energy, w, axis=-1)[:, ::hop][:, :t]

    out = np.empty((b, t, c))
    for i in range(b):
        _, energy = filtered(i)
        out[i] = np.einsum("ctw,cw->tc", framed(energy), pool_w.values)

    def backward(g):
        need_k = k_re.requires_grad or k_im.requires_grad
        acc = np.zeros((c, nfft), dtype=np.complex128)
        gpool = np.zeros_like(pool_w.values)
        for i in range(b):
            y, energy = filtered(i)
            gpool += np.einsum("tc,ctw->cw", g[i], framed(energy))
            if need_k:
                g_energy = _overlap_add(g[i].T[:, :, None] * pool_w.values[:, None, :], hop, n)
                gfull = np.zeros((c, nfft), dtype=np.complex128)
                gfull[:, off : off + n] = 2.0 * g_energy * y
                acc += sfft.fft(gfull, axis=-1) * np.conj(spectra[i])
        gk = sfft.ifft(acc, axis=-1)[:, :length] if need_k else np.zeros((c, length), complex)
        return np.ascontiguousarray(gk.real), np.ascontiguousarray(gk.imag), gpool

    return make_output("gabor_energy_pool", out, (k_re, k_im, pool_w), backward)


def pcen(energy, alpha, delta, root, smooth: float = 0.04, eps: float = 1e-6) -> Tensor:
    """Per-channel energy normalisation over (..., T, C) non-negative energies.

    M_t = (1 - s) M_{t-1} + s E_t with M_0 = E_0, then
    (E / (eps + M)^alpha + delta)^(1/r) - delta^(1/r).
    """
    energy = as_tensor(energy)
    if np.any(energy.values < 0):
        raise ValueError("PCEN input must be non-negative")
    smoothed = ops.ema(energy, smooth, axis=-2)
    gain = ops.div(energy, ops.power(ops.add(smoothed, eps), alpha))
    inv_root = ops.div(1.0, root)
    return ops.sub(ops.power(ops.add(gain, delta), inv_root), ops.power(delta, inv_root))


def leaf_forward(samples: np.ndarray, p: LeafParams, cfg: FrontendConfig) -> Tensor:
    """(B, N) signals -> (B, T, C) differentiable LEAF features."""
    k_re, k_im = gabor_kernels(p.center_hz, p.bandwidth, cfg.gabor_length, cfg.sample_rate)
    pool_w = gaussian_pool_weights(p.pool_width, cfg.window_samples)
    energy = gabor_energy_pool(samples, k_re, k_im, pool_w, cfg.hop_samples)
    if cfg.compression == "log":
        return ops.log(energy, cfg.log_eps)
    return pcen(energy, p.alpha, p.delta, p.root, p.smooth, p.eps)


def leaf_frontend(w: Waveform, p: LeafParams, cfg: FrontendConfig) -> FeatureMap:
    if w.sample_rate != cfg.sample_rate:
        raise ValueError(f"waveform at {w.sample_rate} Hz, frontend configured for {cfg.sample_rate} Hz")
    out = leaf_forward(w.samples[None, :], p, cfg)
    return FeatureMap(out.values[0], cfg.frame_rate, p.center_hz.values.copy())
