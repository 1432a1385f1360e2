"""Feature dumps (MFFT) and PGM spectrogram images."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .config import FeatureMap

MAGIC = b"MFFT"
VERSION = 1
_HEADER = struct.Struct("<4sIBIId")


def dump_features(fm: FeatureMap, tag: int) -> bytes:
    data = np.ascontiguousarray(fm.data, dtype="<f4")
    frames, channels = data.shape
    return _HEADER.pack(MAGIC, VERSION, tag, frames, channels, float(fm.frame_rate)) + data.tobytes()


def load_features(raw: bytes) -> tuple[int, FeatureMap]:
    """Inverse of :func:`dump_features`; returns (frontend tag, feature map)."""
    if len(raw) < _HEADER.size:
        raise ValueError("truncated MFFT header")
    magic, version, tag, frames, channels, rate = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError("not an MFFT feature dump")
    if version != VERSION:
        raise ValueError(f"unsupported MFFT version {version}")
    expected = _HEADER.size + 4 * frames * channels
    if len(raw) != expected:
        raise ValueError(f"MFFT payload is {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(frames, channels)
    return tag, FeatureMap(data.astype(np.float64), rate)


def write_features(path, fm: FeatureMap, tag: int) -> None:
    Path(path).write_bytes(dump_features(fm, tag))


def pgm_bytes(data: np.ndarray) -> bytes:
    """Binary P5 image of a (frames, channels) map: time runs left to right,
    channel 0 is the bottom row, values min-max scaled to 0..255."""
    data = np.asarray(data, dtype=np.float64)
    frames, channels = data.shape
    lo, hi = data.min(), data.max()
    scaled = np.zeros_like(data) if hi <= lo else (data - lo) / (hi - lo)
    pixels = np.round(scaled * 255).astype(np.uint8).T[::-1]
    return f"P5\n{frames} {channels}\n255\n".encode("ascii") + pixels.tobytes()


def write_pgm(path, data: np.ndarray) -> None:
    Path(path).write_bytes(pgm_bytes(data))


def read_pgm(raw: bytes) -> np.ndarray:
    """Parse a P5 image written by :func:`pgm_bytes` -> (height, width) uint8."""
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    width, height, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    pixels = np.frombuffer(parts[4], dtype=np.uint8, count=width * height)
    return pixels.reshape(height, width)
