"""CNN classifiers trained jointly with a frontend."""

from .estimator import FrontendCNNClassifier
from .network import ARCHITECTURES, CNN, ModelConfig, build_model, vgg_blocks
from .training import (
    LOG_COLUMNS, TrainConfig, TrainResult, evaluate_arrays, load_checkpoint, partition_hash,
    predict_proba_arrays, save_checkpoint, train_arrays,
)

__all__ = [
    "ARCHITECTURES", "CNN", "FrontendCNNClassifier", "LOG_COLUMNS", "ModelConfig", "TrainConfig",
    "TrainResult", "build_model", "evaluate_arrays", "load_checkpoint", "partition_hash",
    "predict_proba_arrays", "save_checkpoint", "train_arrays", "vgg_blocks",
]
