"""Joint training of a frontend and a CNN, prediction and checkpoints."""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff import Adam, Tensor, backward, checkpoint, make_rng, no_grad, ops
from ..errors import ConfigError, DataError, NumericalError, ShapeError
from ..evaluation import ConfusionCounts, Scores, metrics
from ..frontends import FRONTEND_TAGS, make_frontend
from .network import CNN, ModelConfig, build_model

log = logging.getLogger(__name__)

LOG_COLUMNS = ("epoch", "train_loss", "val_balanced_accuracy", "val_tpr", "val_tnr")
EVAL_BATCH = 64


@dataclass(frozen=True)
class TrainConfig:
    """Optimisation settings.

    ``eval_every`` sets the validation cadence in epochs (the last epoch is
    always evaluated). ``early_stop_val_ba`` stops training once validation
    balanced accuracy reaches that value.
    """

    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-5
    seed: int = 0
    frontend: str = "mel"
    eval_every: int = 1
    early_stop_val_ba: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.frontend not in FRONTEND_TAGS:
            raise ConfigError(f"frontend must be one of {sorted(FRONTEND_TAGS)}, got {self.frontend!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val: Scores | None


@dataclass
class TrainResult:
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_ba: float = -1.0
    steps: int = 0

    def log_csv(self) -> str:
        lines = [",".join(LOG_COLUMNS)]
        for r in self.history:
            v = r.val
            cells = [f"{v.balanced_accuracy:.6f}", f"{v.tpr:.6f}", f"{v.tnr:.6f}"] if v else ["", "", ""]
            lines.append(",".join([str(r.epoch), f"{r.train_loss:.6f}"] + cells))
        return "\n".join(lines) + "\n"


def predict_proba_arrays(model: CNN, frontend, X: np.ndarray, features: np.ndarray | None = None) -> np.ndarray:
    """Eval-mode class probabilities for waveforms ``X`` (or precomputed features)."""
    out = []
    n = len(X) if features is None else len(features)
    with no_grad():
        for i in range(0, n, EVAL_BATCH):
            f = features[i : i + EVAL_BATCH] if features is not None else frontend.transform(X[i : i + EVAL_BATCH])
            out.append(ops.softmax(model.forward(f, train=False).values))
    return np.concatenate(out)


def evaluate_arrays(model: CNN, frontend, X, y, features=None) -> Scores:
    pred = predict_proba_arrays(model, frontend, X, features).argmax(axis=1)
    return metrics(ConfusionCounts.from_predictions(y, pred))


def train_arrays(
    model: CNN, frontend, X_train: np.ndarray, y_train: np.ndarray, X_val: np.ndarray, y_val: np.ndarray,
    tc: TrainConfig, ids_train=None, log_path=None, checkpoint_path=None, checkpoint_meta: dict | None = None,
    standardize: bool = True,
) -> TrainResult:
    """Mini-batch Adam over model and frontend parameters.

    Shuffle order and dropout masks come from independent streams derived
    from ``tc.seed``. Standardisation statistics are taken from the initial
    frontend's train-split features. After training, the best-validation
    parameters are restored into ``model`` and ``frontend``.
    """
    if len(X_train) == 0 or len(X_val) == 0:
        raise DataError("training and validation partitions must be non-empty")
    ids_train = list(ids_train) if ids_train is not None else [str(i) for i in range(len(X_train))]
    learnable = bool(frontend.parameters())
    params = model.parameters() + frontend.parameters()
    opt = Adam(params, lr=tc.lr)
    shuffle_seq, dropout_seq = np.random.SeedSequence(int(tc.seed)).spawn(2)
    shuffle_rng, dropout_rng = make_rng(shuffle_seq), make_rng(dropout_seq)

    # a fixed frontend is evaluated once up front
    fixed_train = None if learnable else frontend.transform(X_train)
    fixed_val = None if learnable else frontend.transform(X_val)
    if standardize:
        model.set_standardization(frontend.transform(X_train) if learnable else fixed_train)

    result = TrainResult()
    best_state = _snapshot(model, frontend)
    for epoch in range(1, tc.epochs + 1):
        order = shuffle_rng.permutation(len(X_train))
        losses, sizes = [], []
        for start in range(0, len(order), tc.batch_size):
            idx = order[start : start + tc.batch_size]
            batch_ids = [ids_train[i] for i in idx]
            try:
                feats = frontend.forward(X_train[idx]) if learnable else Tensor(fixed_train[idx])
                logits = model.forward(feats, train=True, rng=dropout_rng)
                loss = ops.softmax_cross_entropy(logits, y_train[idx])
                backward(loss)
            except NumericalError as exc:
                raise NumericalError(f"epoch {epoch}: non-finite value in batch ({exc})", batch_ids) from exc
            if not math.isfinite(loss.item()):
                raise NumericalError(f"epoch {epoch}: loss is {loss.item()}", batch_ids)
            opt.step()
            frontend.clamp_()
            result.steps += 1
            losses.append(loss.item())
            sizes.append(len(idx))
        train_loss = float(np.average(losses, weights=sizes))

        val = None
        if epoch % tc.eval_every == 0 or epoch == tc.epochs:
            val = evaluate_arrays(model, frontend, X_val, y_val, fixed_val)
            if val.balanced_accuracy > result.best_val_ba:
                result.best_val_ba = val.balanced_accuracy
                result.best_epoch = epoch
                best_state = _snapshot(model, frontend)
                if checkpoint_path is not None:
                    save_checkpoint(checkpoint_path, model, frontend, tc, checkpoint_meta)
        result.history.append(EpochRecord(epoch, train_loss, val))
        log.info("epoch %d loss %.4f val BA %s", epoch, train_loss,
                 f"{val.balanced_accuracy:.4f}" if val else "-")
        if log_path is not None:
            Path(log_path).write_text(result.log_csv(), encoding="utf-8")
        if val is not None and tc.early_stop_val_ba is not None and val.balanced_accuracy >= tc.early_stop_val_ba:
            break
    _restore(model, frontend, best_state)
    return result


def _snapshot(model: CNN, frontend) -> tuple[dict, dict]:
    return model.state_dict(), {k: v.values.copy() for k, v in frontend.named_parameters().items()}


def _restore(model: CNN, frontend, state) -> None:
    model.load_state_dict(state[0])
    if state[1]:
        frontend.load_parameters(state[1])


# ------------------------------------------------------------------ checkpoints


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def checkpoint_bytes(model: CNN, frontend) -> bytes:
    values = {f"model/{k}": v for k, v in model.state_dict().items()}
    values.update({f"frontend/{k}": v.values for k, v in frontend.named_parameters().items()})
    return checkpoint.dumps(values)


def checkpoint_sidecar(model: CNN, frontend, tc: TrainConfig, meta: dict | None = None) -> dict:
    side = {
        "format": "medfront-checkpoint v1",
        "model_config": model.cfg.to_dict(),
        "train_config": tc.to_dict(),
        "frontend": frontend.name,
        "frontend_tag": frontend.tag,
        "frontend_params": frontend.get_params(),
        "input_shape": list(model.input_shape),
        "standardization": {"mean": model.norm_mean.tolist(), "std": model.norm_std.tolist()},
    }
    side.update(meta or {})
    return side


def save_checkpoint(path, model: CNN, frontend, tc: TrainConfig, meta: dict | None = None) -> None:
    """Parameters to ``path`` (MFCK) and configs plus statistics to a JSON sidecar."""
    Path(path).write_bytes(checkpoint_bytes(model, frontend))
    side = checkpoint_sidecar(model, frontend, tc, meta)
    sidecar_path(path).write_text(json.dumps(side, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[CNN, object, TrainConfig, dict]:
    """Inverse of :func:`save_checkpoint` -> (model, fitted frontend, train config, sidecar)."""
    path = Path(path)
    if not path.is_file() or not sidecar_path(path).is_file():
        raise DataError(f"checkpoint {path} or its sidecar {sidecar_path(path).name} is missing")
    side = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    values = checkpoint.load(path)
    frontend = make_frontend(side["frontend"], **side["frontend_params"]).fit()
    model = build_model(ModelConfig.from_dict(side["model_config"]), tuple(side["input_shape"]))
    model.load_state_dict({k[len("model/"):]: v for k, v in values.items() if k.startswith("model/")})
    fvals = {k[len("frontend/"):]: v for k, v in values.items() if k.startswith("frontend/")}
    if fvals or frontend.named_parameters():
        frontend.load_parameters(fvals)
    model.norm_mean = np.asarray(side["standardization"]["mean"], dtype=np.float64)
    model.norm_std = np.asarray(side["standardization"]["std"], dtype=np.float64)
    return model, frontend, TrainConfig(**side["train_config"]), side


def check_feature_shape(model: CNN, features_shape: tuple[int, ...]) -> None:
    if tuple(features_shape[-2:]) != model.input_shape:
        raise ShapeError(f"features have shape {tuple(features_shape[-2:])}, model was trained on {model.input_shape}")


def partition_hash(entries) -> str:
    """SHA-256 over (path, label) of a partition's entries, in manifest order."""
    h = hashlib.sha256()
    buf = io.StringIO()
    for e in entries:
        buf.write(f"{e.segment_path},{e.label}\n")
    h.update(buf.getvalue().encode("utf-8"))
    return h.hexdigest()
