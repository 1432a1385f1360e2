"""Input validation helpers for the estimator API."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .signal import Waveform


def check_waveforms(X, min_samples: int = 1) -> np.ndarray:
    """Coerce ``X`` to a finite float64 array of shape (n_signals, n_samples).

    Accepts a 2-D array, a list of equal-length 1-D arrays, or a list of
    :class:`Waveform` objects.
    """
    if isinstance(X, Waveform):
        X = [X]
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], Waveform):
        lengths = {len(w) for w in X}
        if len(lengths) != 1:
            raise ValueError(f"waveforms must share one length, got lengths {sorted(lengths)}")
        X = np.stack([w.samples for w in X])
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_all_finite=True)
    if X.shape[1] < min_samples:
        raise ValueError(f"signals have {X.shape[1]} samples; at least {min_samples} are required")
    return X


def check_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    return y
