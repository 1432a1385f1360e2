"""Transformer wrappers exposing the frontends through the scikit-learn API.

``fit`` only validates the configuration and initialises parameters; learning
happens jointly with a classifier (see :class:`medfront.model.FrontendCNNClassifier`).
``transform`` maps (n_signals, n_samples) waveforms to (n_signals, frames, filters).
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..autodiff import Tensor, no_grad
from ..validation import check_waveforms
from .config import FeatureMap, FrontendConfig
from .leaf import LeafParams, init_leaf, leaf_forward
from .mel import log_mel, mel_center_frequencies, mel_filterbank_matrix
from .nnaudio import NnAudioParams, init_nnaudio, nnaudio_forward

FRONTEND_TAGS = {"mel": 0, "leaf": 1, "nnaudio": 2}


class _Frontend(TransformerMixin, BaseEstimator):
    name = ""
    chunk_size = 32

    def _config(self) -> FrontendConfig:
        params = self.get_params()
        return FrontendConfig(**params)

    @property
    def tag(self) -> int:
        return FRONTEND_TAGS[self.name]

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        self._init_state()
        if X is not None:
            X = check_waveforms(X, self.config_.window_samples)
            self.n_samples_in_ = X.shape[1]
        return self

    def _init_state(self):
        pass

    def forward(self, X) -> Tensor:
        """Differentiable features for a batch (recorded on the active tape)."""
        raise NotImplementedError

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "config_")
        X = check_waveforms(X, self.config_.window_samples)
        out = []
        with no_grad():
            for i in range(0, len(X), self.chunk_size):
                out.append(self.forward(X[i : i + self.chunk_size]).values)
        return np.concatenate(out)

    def feature_map(self, X) -> FeatureMap:
        """Features of a single waveform as a :class:`FeatureMap`."""
        data = self.transform(X)
        if data.shape[0] != 1:
            raise ValueError("feature_map expects exactly one waveform")
        return FeatureMap(data[0], self.config_.frame_rate, self.channel_centers())

    def channel_centers(self) -> np.ndarray:
        return mel_center_frequencies(self.config_)

    def named_parameters(self) -> dict[str, Tensor]:
        return {}

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def clamp_(self) -> None:
        pass

    def load_parameters(self, values: dict[str, np.ndarray]) -> None:
        for name, t in self.named_parameters().items():
            if name not in values:
                raise KeyError(f"checkpoint has no value for frontend parameter {name!r}")
            if values[name].shape != t.shape:
                raise ValueError(f"{name}: checkpoint shape {values[name].shape} != {t.shape}")
            t.values = values[name].copy()


class MelFrontend(_Frontend):
    """Fixed log-mel filterbank; has no learnable parameters."""

    name = "mel"

    def __init__(self, sample_rate=4000, window_ms=30.0, hop_ms=10.0, n_filters=128,
                 fmin_hz=100.0, fmax_hz=2000.0, window_kind="hann", n_fft=None, log_eps=1e-6):
        self.sample_rate = sample_rate
        self.window_ms = window_ms
        self.hop_ms = hop_ms
        self.n_filters = n_filters
        self.fmin_hz = fmin_hz
        self.fmax_hz = fmax_hz
        self.window_kind = window_kind
        self.n_fft = n_fft
        self.log_eps = log_eps

    def _init_state(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            self.filterbank_ = mel_filterbank_matrix(self.config_)
        self.empty_channels_ = np.flatnonzero(self.filterbank_.max(axis=1) == 0)
        for w in caught:
            warnings.warn(w.message, stacklevel=3)

    def forward(self, X) -> Tensor:
        return Tensor(log_mel(np.asarray(X), self.config_, self.filterbank_))


class LeafFrontend(_Frontend):
    """Learnable Gabor filterbank + Gaussian pooling + PCEN."""

    name = "leaf"

    def __init__(self, sample_rate=4000, window_ms=30.0, hop_ms=10.0, n_filters=128,
                 fmin_hz=100.0, fmax_hz=2000.0, compression=None, gabor_length=401,
                 pcen_alpha=2.0, pcen_delta=2.0, pcen_root=4.0, pcen_smooth=0.04,
                 pcen_eps=1e-6, log_eps=1e-6):
        self.sample_rate = sample_rate
        self.window_ms = window_ms
        self.hop_ms = hop_ms
        self.n_filters = n_filters
        self.fmin_hz = fmin_hz
        self.fmax_hz = fmax_hz
        self.compression = compression
        self.gabor_length = gabor_length
        self.pcen_alpha = pcen_alpha
        self.pcen_delta = pcen_delta
        self.pcen_root = pcen_root
        self.pcen_smooth = pcen_smooth
        self.pcen_eps = pcen_eps
        self.log_eps = log_eps

    def _init_state(self):
        self.params_: LeafParams = init_leaf(self.config_)

    def forward(self, X) -> Tensor:
        return leaf_forward(np.asarray(X), self.params_, self.config_)

    def channel_centers(self) -> np.ndarray:
        return self.params_.center_hz.values.copy()

    def named_parameters(self) -> dict[str, Tensor]:
        check_is_fitted(self, "params_")
        tensors = self.params_.tensors()
        if self.config_.compression == "log":
            # PCEN is bypassed, so its parameters would never receive a gradient
            tensors = {k: v for k, v in tensors.items() if not k.startswith("pcen_")}
        return tensors

    def clamp_(self) -> None:
        self.params_.clamp_(self.config_)


class NnAudioFrontend(_Frontend):
    """Trainable STFT kernel banks followed by a trainable mel projection."""

    name = "nnaudio"

    def __init__(self, sample_rate=4000, window_ms=30.0, hop_ms=10.0, n_filters=128,
                 fmin_hz=100.0, fmax_hz=2000.0, window_kind="hann", n_fft=None, log_eps=1e-6):
        self.sample_rate = sample_rate
        self.window_ms = window_ms
        self.hop_ms = hop_ms
        self.n_filters = n_filters
        self.fmin_hz = fmin_hz
        self.fmax_hz = fmax_hz
        self.window_kind = window_kind
        self.n_fft = n_fft
        self.log_eps = log_eps

    def _init_state(self):
        self.params_: NnAudioParams = init_nnaudio(self.config_)

    def forward(self, X) -> Tensor:
        return nnaudio_forward(np.asarray(X), self.params_, self.config_)

    def named_parameters(self) -> dict[str, Tensor]:
        check_is_fitted(self, "params_")
        return self.params_.tensors()


FRONTENDS = {"mel": MelFrontend, "leaf": LeafFrontend, "nnaudio": NnAudioFrontend}


def make_frontend(name: str, **params) -> _Frontend:
    """Construct a frontend by name, ignoring keyword arguments it does not accept."""
    try:
        cls = FRONTENDS[name]
    except KeyError:
        raise ValueError(f"unknown frontend {name!r}; expected one of {sorted(FRONTENDS)}") from None
    accepted = cls._get_param_names()
    return cls(**{k: v for k, v in params.items() if k in accepted})
