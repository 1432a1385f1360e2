"""scikit-learn classifier wrapping a frontend and a CNN."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..frontends import make_frontend
from ..validation import check_labels, check_waveforms
from .network import ModelConfig, build_model
from .training import TrainConfig, check_feature_shape, predict_proba_arrays, train_arrays


class FrontendCNNClassifier(ClassifierMixin, BaseEstimator):
    """Waveform classifier: frontend -> standardisation -> CNN, trained end to end.

    ``fit`` accepts an explicit validation set through ``X_val``/``y_val``;
    without one, training data doubles as validation data for checkpoint
    selection.
    """

    def __init__(self, frontend="mel", frontend_params=None, architecture="compact", conv_blocks=None,
                 dense_units=None, dropout_p=0.5, activation="relu", vgg_width=64, epochs=30,
                 batch_size=64, lr=1e-5, seed=0, eval_every=1, early_stop_val_ba=None):
        self.frontend = frontend
        self.frontend_params = frontend_params
        self.architecture = architecture
        self.conv_blocks = conv_blocks
        self.dense_units = dense_units
        self.dropout_p = dropout_p
        self.activation = activation
        self.vgg_width = vgg_width
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.seed = seed
        self.eval_every = eval_every
        self.early_stop_val_ba = early_stop_val_ba

    def _model_config(self, n_classes: int) -> ModelConfig:
        return ModelConfig(
            architecture=self.architecture,
            conv_blocks=None if self.conv_blocks is None else tuple(tuple(b) for b in self.conv_blocks),
            dense_units=None if self.dense_units is None else tuple(self.dense_units),
            dropout_p=self.dropout_p, activation=self.activation, num_classes=n_classes,
            vgg_width=self.vgg_width,
        )

    def _train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size, lr=self.lr, seed=self.seed,
                           frontend=self.frontend, eval_every=self.eval_every,
                           early_stop_val_ba=self.early_stop_val_ba)

    def fit(self, X, y, X_val=None, y_val=None):
        X = check_waveforms(X)
        y = check_labels(y, len(X))
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("training labels contain a single class")
        if X_val is None:
            X_val, yv_idx = X, y_idx
        else:
            X_val = check_waveforms(X_val)
            y_val = check_labels(y_val, len(X_val))
            unknown = set(np.unique(y_val)) - set(self.classes_)
            if unknown:
                raise ValueError(f"validation labels {sorted(unknown)} do not occur in training labels")
            yv_idx = np.searchsorted(self.classes_, y_val)
        tc = self._train_config()
        self.frontend_ = make_frontend(self.frontend, **(self.frontend_params or {})).fit(X)
        probe = self.frontend_.transform(X[:1])
        self.model_ = build_model(self._model_config(len(self.classes_)), probe.shape[1:], seed=self.seed)
        self.result_ = train_arrays(self.model_, self.frontend_, X, y_idx, X_val, yv_idx, tc)
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        X = check_waveforms(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"signals have {X.shape[1]} samples; the classifier was fitted on {self.n_features_in_}")
        return predict_proba_arrays(self.model_, self.frontend_, X)

    def predict(self, X) -> np.ndarray:
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    def transform_features(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        feats = self.frontend_.transform(check_waveforms(X))
        check_feature_shape(self.model_, feats.shape)
        return feats
