"""Convolutional classifiers over (frames, filters) feature maps."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, make_rng, ops
from ..errors import ConfigError, ShapeError, SizingError

ARCHITECTURES = ("compact", "vgg_style")
ACTIVATIONS = ("relu", "swish")
COMPACT_BLOCKS = ((8, 3, 2), (16, 3, 2))
VGG_GROUPS = (2, 2, 3, 3, 3)
VGG_MULTIPLIERS = (1, 2, 4, 8, 8)
STD_FLOOR_FRACTION = 0.1


def vgg_blocks(width: int = 64) -> tuple[tuple[int, int, int], ...]:
    """13 3x3 convolutions in groups of (2, 2, 3, 3, 3), pooling after each group."""
    blocks = []
    for group, mult in zip(VGG_GROUPS, VGG_MULTIPLIERS):
        for k in range(group):
            blocks.append((width * mult, 3, 2 if k == group - 1 else 1))
    return tuple(blocks)


@dataclass(frozen=True)
class ModelConfig:
    """Network layout.

    ``conv_blocks`` holds (channels, kernel, pool) triples; pool 1 means no
    pooling after that convolution. ``dense_units`` are the hidden dense
    widths; the logits layer is appended automatically. ``vgg_width`` scales
    the vgg_style preset (64 gives VGG16's widths and two 4096-unit layers).
    """

    architecture: str = "compact"
    conv_blocks: tuple[tuple[int, int, int], ...] | None = None
    dense_units: tuple[int, ...] | None = None
    dropout_p: float = 0.5
    activation: str = "relu"
    num_classes: int = 2
    vgg_width: int = 64

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.vgg_width < 1:
            raise ConfigError(f"vgg_width must be positive, got {self.vgg_width}")
        blocks = self.blocks
        if not blocks:
            raise ConfigError("at least one conv block is required")
        for ch, k, pool in blocks:
            if ch < 1 or k < 1 or k % 2 == 0 or pool < 1:
                raise ConfigError(f"conv block (channels={ch}, kernel={k}, pool={pool}) is invalid; kernels must be odd")
        if any(u < 1 for u in self.units):
            raise ConfigError(f"dense units must be positive, got {self.units}")

    @property
    def blocks(self) -> tuple[tuple[int, int, int], ...]:
        if self.conv_blocks is not None:
            return tuple(tuple(int(v) for v in b) for b in self.conv_blocks)
        return COMPACT_BLOCKS if self.architecture == "compact" else vgg_blocks(self.vgg_width)

    @property
    def units(self) -> tuple[int, ...]:
        if self.dense_units is not None:
            return tuple(int(u) for u in self.dense_units)
        return (32,) if self.architecture == "compact" else (64 * self.vgg_width, 64 * self.vgg_width)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["conv_blocks"] = [list(b) for b in self.blocks]
        d["dense_units"] = list(self.units)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ModelConfig:
        d = dict(d)
        if d.get("conv_blocks") is not None:
            d["conv_blocks"] = tuple(tuple(b) for b in d["conv_blocks"])
        if d.get("dense_units") is not None:
            d["dense_units"] = tuple(d["dense_units"])
        return cls(**d)


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    # He-normal gives large initial logits that the first Adam step overshoots.
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


class CNN:
    """Conv blocks ('same' padding, activation, max-pool), flatten, dense stack.

    Dropout precedes each of the last two dense layers. Inputs are standardised
    per feature channel with fixed statistics before the first convolution.
    """

    def __init__(self, cfg: ModelConfig, input_shape: tuple[int, int], seed: int = 0):
        self.cfg = cfg
        self.input_shape = (int(input_shape[0]), int(input_shape[1]))
        self.shapes = self._propagate()
        rng = make_rng(seed)
        self.params: dict[str, Tensor] = {}
        cin = 1
        for i, (ch, k, _) in enumerate(cfg.blocks):
            self._add(f"conv{i}.weight", _glorot(rng, (ch, cin, k, k), cin * k * k, ch * k * k))
            self._add(f"conv{i}.bias", np.zeros(ch))
            cin = ch
        fan_in = cin * self.shapes[-1][0] * self.shapes[-1][1]
        for j, units in enumerate(cfg.units + (cfg.num_classes,)):
            self._add(f"dense{j}.weight", _glorot(rng, (units, fan_in), fan_in, units))
            self._add(f"dense{j}.bias", np.zeros(units))
            fan_in = units
        channels = self.input_shape[1]
        self.norm_mean = np.zeros(channels)
        self.norm_std = np.ones(channels)

    def _add(self, name: str, values: np.ndarray) -> None:
        self.params[name] = Tensor(values, requires_grad=True, name=name)

    def _propagate(self) -> list[tuple[int, int]]:
        h, w = self.input_shape
        shapes = [(h, w)]
        for i, (_, k, pool) in enumerate(self.cfg.blocks):
            if h < k or w < k or h < pool or w < pool:
                raise SizingError(
                    f"feature map {self.input_shape} shrinks to {h}x{w} before conv block {i} "
                    f"(kernel {k}, pool {pool}); use fewer blocks or a larger input"
                )
            h, w = h // pool, w // pool
            shapes.append((h, w))
        return shapes

    def set_standardization(self, features: np.ndarray) -> None:
        """Per-channel mean/std over (samples, frames) of ``features`` (n, T, C).

        Stds are floored at ``STD_FLOOR_FRACTION`` of the median channel std so
        that channels that are (nearly) constant at init, such as empty mel
        rows, cannot blow up once a learnable frontend wakes them.
        """
        features = np.asarray(features, dtype=np.float64)
        self.norm_mean = features.mean(axis=(0, 1))
        std = features.std(axis=(0, 1))
        floor = max(STD_FLOOR_FRACTION * float(np.median(std)), 1e-8)
        self.norm_std = np.maximum(std, floor)

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.values.copy() for k, v in self.params.items()}

    def load_state_dict(self, values: dict[str, np.ndarray]) -> None:
        for name, t in self.params.items():
            if name not in values:
                raise KeyError(f"checkpoint has no value for model parameter {name!r}")
            if values[name].shape != t.shape:
                raise ShapeError(f"{name}: checkpoint shape {values[name].shape} != model shape {t.shape}")
            t.values = np.array(values[name], dtype=np.float64)

    def _act(self, x: Tensor) -> Tensor:
        return ops.relu(x) if self.cfg.activation == "relu" else ops.swish(x)

    def forward(self, features, train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        """(B, T, C) features -> (B, num_classes) logits."""
        x = features if isinstance(features, Tensor) else Tensor(features)
        if x.ndim != 3 or x.shape[1:] != self.input_shape:
            raise ShapeError(f"model expects features of shape (batch, {self.input_shape[0]}, "
                             f"{self.input_shape[1]}), got {x.shape}")
        x = (x - Tensor(self.norm_mean)) / Tensor(self.norm_std)
        x = ops.reshape(x, (x.shape[0], 1) + self.input_shape)
        p = self.params
        for i, (_, k, pool) in enumerate(self.cfg.blocks):
            x = self._act(ops.conv2d(x, p[f"conv{i}.weight"], p[f"conv{i}.bias"], padding=k // 2))
            if pool > 1:
                x = ops.max_pool2d(x, pool)
        x = ops.flatten(x)
        n_dense = len(self.cfg.units) + 1
        for j in range(n_dense):
            if j >= n_dense - 2 and self.cfg.dropout_p > 0:
                x = ops.dropout(x, self.cfg.dropout_p, train, rng)
            x = ops.dense(x, p[f"dense{j}.weight"], p[f"dense{j}.bias"])
            if j < n_dense - 1:
                x = self._act(x)
        return x


def build_model(cfg: ModelConfig, input_shape: tuple[int, int] = (198, 128), seed: int = 0) -> CNN:
    return CNN(cfg, input_shape, seed)
