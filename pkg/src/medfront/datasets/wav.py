"""RIFF/WAVE reading and writing (PCM 16/24/32-bit and IEEE float 32-bit)."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import WavParseError
from ..signal import Waveform

_PCM = 1
_FLOAT = 3
_EXTENSIBLE = 0xFFFE


def parse_wav(data: bytes, source_id: str = "") -> Waveform:
    """Decode a WAV byte string to a mono :class:`Waveform` scaled to [-1, 1].

    Multichannel audio is averaged to mono. Integer PCM is divided by
    2**(bits - 1) (32768 for 16-bit).
    """
    if len(data) < 12:
        raise WavParseError(f"file is {len(data)} bytes, too short for a RIFF header (offset 0)")
    riff, _, wave = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF" or wave != b"WAVE":
        raise WavParseError("missing RIFF/WAVE signature at offset 0")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id, size = struct.unpack_from("<4sI", data, pos)
        body = pos + 8
        if chunk_id == b"fmt ":
            if size < 16 or body + 16 > len(data):
                raise WavParseError(f"fmt chunk too short at offset {pos}")
            fmt = struct.unpack_from("<HHIIHH", data, body)
            codec = fmt[0]
            if codec == _EXTENSIBLE:
                if size < 40 or body + 26 > len(data):
                    raise WavParseError(f"extensible fmt chunk too short at offset {pos}")
                (codec,) = struct.unpack_from("<H", data, body + 24)
            fmt = (codec,) + fmt[1:]
        elif chunk_id == b"data":
            end = min(body + size, len(data))
            payload = data[body:end]
        pos = body + size + (size & 1)

    if fmt is None:
        raise WavParseError(f"no fmt chunk found before offset {len(data)}")
    if payload is None:
        raise WavParseError(f"no data chunk found before offset {len(data)}")
    codec, channels, rate, _, block_align, bits = fmt
    if channels < 1 or rate < 1:
        raise WavParseError(f"invalid channel count {channels} or sample rate {rate} at offset 20")

    if codec == _PCM and bits in (16, 24, 32):
        width = bits // 8
        usable = len(payload) - len(payload) % (width * channels)
        raw = np.frombuffer(payload[:usable], dtype=np.uint8)
        if width == 3:
            b = raw.reshape(-1, 3).astype(np.int32)
            ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
            ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        else:
            ints = raw.view(f"<i{width}")
        samples = ints.astype(np.float64) / float(1 << (bits - 1))
    elif codec == _FLOAT and bits == 32:
        usable = len(payload) - len(payload) % (4 * channels)
        samples = np.frombuffer(payload[:usable], dtype="<f4").astype(np.float64)
    else:
        raise WavParseError(f"unsupported codec {codec} with {bits} bits per sample (fmt chunk, offset 20)")

    samples = samples.reshape(-1, channels).mean(axis=1)
    if not np.all(np.isfinite(samples)):
        raise WavParseError("sample data contains NaN or Inf")
    return Waveform(samples, rate, source_id)


def read_wav(path) -> Waveform:
    path = Path(path)
    return parse_wav(path.read_bytes(), source_id=path.name)


def wav_bytes(w: Waveform, sample_format: str = "float32") -> bytes:
    if sample_format == "float32":
        codec, bits = _FLOAT, 32
        payload = np.asarray(w.samples, dtype="<f4").tobytes()
    elif sample_format == "pcm16":
        codec, bits = _PCM, 16
        payload = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2").tobytes()
    else:
        raise ValueError(f"unknown sample format {sample_format!r}")
    block = bits // 8
    fmt = struct.pack("<HHIIHH", codec, 1, w.sample_rate, w.sample_rate * block, block, bits)
    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        chunks += b"\x00"
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks


def write_wav(path, w: Waveform, sample_format: str = "float32") -> None:
    Path(path).write_bytes(wav_bytes(w, sample_format))
