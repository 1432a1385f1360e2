from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..signal import WINDOW_KINDS, frame_count, ms_to_samples, next_power_of_two


@dataclass(frozen=True)
class FrontendConfig:
    """Analysis parameters shared by all three frontends."""

    window_ms: float = 30.0
    hop_ms: float = 10.0
    n_filters: int = 128
    fmin_hz: float = 100.0
    fmax_hz: float = 2000.0
    sample_rate: int = 4000
    compression: str | None = None  # None -> the frontend's native compression
    window_kind: str = "hann"
    n_fft: int | None = None
    log_eps: float = 1e-6
    gabor_length: int = 401
    pcen_alpha: float = 2.0
    pcen_delta: float = 2.0
    pcen_root: float = 4.0
    pcen_smooth: float = 0.04
    pcen_eps: float = 1e-6

    def __post_init__(self):
        if not 0 <= self.fmin_hz < self.fmax_hz <= self.sample_rate / 2:
            raise ValueError(
                f"need 0 <= fmin < fmax <= sample_rate/2, got [{self.fmin_hz}, {self.fmax_hz}] "
                f"at {self.sample_rate} Hz"
            )
        if self.n_filters < 1:
            raise ValueError(f"n_filters must be >= 1, got {self.n_filters}")
        if self.compression not in (None, "log", "pcen"):
            raise ValueError(f"compression must be 'log' or 'pcen', got {self.compression!r}")
        if self.window_kind not in WINDOW_KINDS:
            raise ValueError(f"window_kind must be one of {WINDOW_KINDS}")
        if self.window_samples < 1 or self.hop_samples < 1:
            raise ValueError("window and hop must each cover at least one sample")
        if self.n_fft is not None and self.n_fft < self.window_samples:
            raise ValueError(f"n_fft={self.n_fft} is smaller than the window")
        if self.gabor_length < 1 or self.gabor_length % 2 == 0:
            raise ValueError("gabor_length must be a positive odd number of samples")

    @property
    def window_samples(self) -> int:
        return ms_to_samples(self.window_ms, self.sample_rate)

    @property
    def hop_samples(self) -> int:
        return ms_to_samples(self.hop_ms, self.sample_rate)

    @property
    def fft_size(self) -> int:
        return self.n_fft if self.n_fft is not None else next_power_of_two(self.window_samples)

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop_samples

    def n_frames(self, n_samples: int) -> int:
        return frame_count(n_samples, self.window_samples, self.hop_samples)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FeatureMap:
    """frames x channels features with the nominal centre frequency of each channel."""

    data: np.ndarray
    frame_rate: float
    channel_center_hz: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]
