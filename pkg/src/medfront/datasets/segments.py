"""Cycle annotations, segmentation and the binary labelling rule."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from ..errors import AnnotationError
from ..signal import Waveform

log = logging.getLogger(__name__)

LABELS = ("normal", "abnormal")


def label_index(label: str) -> int:
    """0 for normal, 1 for abnormal (the positive class)."""
    try:
        return LABELS.index(label)
    except ValueError:
        raise ValueError(f"label must be one of {LABELS}, got {label!r}") from None


@dataclass(frozen=True)
class CycleAnnotation:
    start_s: float
    end_s: float
    crackles: bool
    wheezes: bool

    @property
    def label(self) -> str:
        return "abnormal" if (self.crackles or self.wheezes) else "normal"


@dataclass
class Segment:
    waveform: Waveform
    label: str
    origin_file: str
    origin_span: tuple[float, float]
    patient_id: str | None = None
    path: str = ""


def _flag(token: str, lineno: int, what: str) -> bool:
    if token not in ("0", "1"):
        raise AnnotationError(f"line {lineno}: {what} flag must be 0 or 1, got {token!r}")
    return token == "1"


def parse_cycle_annotations(text: str) -> list[CycleAnnotation]:
    """Parse ICBHI sidecar lines ``start end crackles wheezes``."""
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 4:
            raise AnnotationError(f"line {lineno}: expected 4 fields, got {len(fields)}")
        try:
            start, end = float(fields[0]), float(fields[1])
        except ValueError:
            raise AnnotationError(f"line {lineno}: non-numeric time in {line.strip()!r}") from None
        if not (math.isfinite(start) and math.isfinite(end)) or start < 0:
            raise AnnotationError(f"line {lineno}: invalid times {start}, {end}")
        if end <= start:
            raise AnnotationError(f"line {lineno}: end {end} is not after start {start}")
        out.append(CycleAnnotation(start, end, _flag(fields[2], lineno, "crackles"), _flag(fields[3], lineno, "wheezes")))
    return out


def _slice(w: Waveform, start_s: float, end_s: float) -> Waveform:
    a = int(round(start_s * w.sample_rate))
    b = int(round(end_s * w.sample_rate))
    return Waveform(w.samples[a:b].copy(), w.sample_rate, w.source_id)


def segment_by_cycles(
    w: Waveform, annotations, origin_file: str = "", patient_id: str | None = None
) -> list[Segment]:
    """One clip per annotated cycle; marks past the end of the recording are clipped."""
    origin_file = origin_file or w.source_id
    out = []
    for ann in annotations:
        start, end = ann.start_s, ann.end_s
        if end > w.duration_s:
            log.warning("%s: cycle %.3f-%.3f s overhangs the %.3f s recording; clipped",
                        origin_file, start, end, w.duration_s)
            end = w.duration_s
        if start >= end:
            log.warning("%s: cycle starting at %.3f s lies outside the recording; skipped", origin_file, start)
            continue
        out.append(Segment(_slice(w, start, end), ann.label, origin_file, (start, end), patient_id))
    return out


def segment_fixed(
    w: Waveform, chunk_s: float = 2.0, label: str = "normal", origin_file: str = "",
    patient_id: str | None = None,
) -> list[Segment]:
    """Consecutive non-overlapping chunks; a shorter remainder is kept as the last chunk."""
    if chunk_s <= 0:
        raise ValueError(f"chunk length must be positive, got {chunk_s}")
    label_index(label)
    origin_file = origin_file or w.source_id
    step = int(round(chunk_s * w.sample_rate))
    out = []
    for a in range(0, len(w), step):
        b = min(a + step, len(w))
        span = (a / w.sample_rate, b / w.sample_rate)
        chunk = Waveform(w.samples[a:b].copy(), w.sample_rate, w.source_id)
        out.append(Segment(chunk, label, origin_file, span, patient_id))
    return out
