"""Binary parameter checkpoints.

Layout (little-endian)::

    b"MFCK"  u32 version
    repeated until EOF:
        u32 name_len, name (UTF-8), u32 rank, rank x u64 dims, prod(dims) x f64 values
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"MFCK"
VERSION = 1


def dumps(params: Mapping[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    for name, values in params.items():
        arr = np.asarray(values, dtype="<f8", order="C")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes())
    return b"".join(chunks)


def loads(data: bytes) -> dict[str, np.ndarray]:
    if data[:4] != MAGIC:
        raise ValueError("not an MFCK checkpoint (bad magic)")
    if len(data) < 8:
        raise ValueError("truncated MFCK header")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise ValueError(f"unsupported MFCK version {version}")
    out: dict[str, np.ndarray] = {}
    pos = 8
    try:
        while pos < len(data):
            (n,) = struct.unpack_from("<I", data, pos)
            pos += 4
            name = data[pos : pos + n].decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<I", data, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}Q", data, pos)
            pos += 8 * rank
            count = int(np.prod(dims)) if rank else 1
            if pos + 8 * count > len(data):
                raise ValueError(f"truncated values for parameter {name!r}")
            out[name] = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(dims).copy()
            pos += 8 * count
    except struct.error as exc:
        raise ValueError(f"truncated MFCK record at offset {pos}") from exc
    return out


def save(path, params: Mapping[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(params))


def load(path) -> dict[str, np.ndarray]:
    return loads(Path(path).read_bytes())
