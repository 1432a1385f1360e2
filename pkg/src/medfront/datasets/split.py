"""Stratified train/val/test splitting and the manifest CSV."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff.random import make_rng
from ..errors import DataError
from .segments import LABELS

PARTITIONS = ("train", "val", "test")
DEFAULT_FRACTIONS = (0.75, 0.15, 0.10)
MANIFEST_HEADER = "medfront-manifest v1"
MANIFEST_COLUMNS = ("segment_path", "label", "partition", "origin_file", "start_s", "end_s", "patient_id")


@dataclass(frozen=True)
class ManifestEntry:
    segment_path: str
    label: str
    partition: str
    origin_file: str = ""
    start_s: float = 0.0
    end_s: float = 0.0
    patient_id: str | None = None


@dataclass
class SplitManifest:
    seed: int
    entries: list[ManifestEntry]
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS
    root: Path | None = field(default=None, compare=False)

    def partition(self, name: str) -> list[ManifestEntry]:
        if name not in PARTITIONS:
            raise ValueError(f"partition must be one of {PARTITIONS}, got {name!r}")
        return [e for e in self.entries if e.partition == name]

    def counts(self) -> dict[tuple[str, str], int]:
        """(label, partition) -> number of segments."""
        c = Counter((e.label, e.partition) for e in self.entries)
        return {(lab, part): c.get((lab, part), 0) for lab in LABELS for part in PARTITIONS}

    def resolve(self, entry: ManifestEntry) -> Path:
        base = self.root if self.root is not None else Path(".")
        return base / entry.segment_path


def _check_fractions(fractions) -> tuple[float, float, float]:
    fr = tuple(float(f) for f in fractions)
    if len(fr) != 3 or any(f < 0 for f in fr) or not math.isclose(sum(fr), 1.0, abs_tol=1e-9):
        raise ValueError(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    return fr


def allocate(class_sizes: list[int], fractions) -> list[list[int]]:
    """Per-class partition counts by largest remainder.

    Each class gets floor(f * n) per partition; leftover units go to the
    largest fractional parts. Ties go to the partition that is furthest behind
    its target over all classes allocated so far, then to partition order.
    """
    fr = _check_fractions(fractions)
    running = [0] * len(fr)
    seen = 0
    out = []
    for n in class_sizes:
        quotas = [f * n for f in fr]
        counts = [math.floor(q + 1e-9) for q in quotas]
        seen += n
        for _ in range(n - sum(counts)):
            deficit = [fr[p] * seen - running[p] - counts[p] for p in range(len(fr))]
            p = max(range(len(fr)), key=lambda k: (round(quotas[k] - counts[k], 9), round(deficit[k], 9), -k))
            counts[p] += 1
        running = [r + c for r, c in zip(running, counts)]
        out.append(counts)
    return out


def _labels_of(segments) -> list[str]:
    labels = [s if isinstance(s, str) else s.label for s in segments]
    for lab in labels:
        if lab not in LABELS:
            raise DataError(f"unknown label {lab!r}")
    return labels


def _entry(seg, partition: str) -> ManifestEntry:
    if isinstance(seg, str):
        return ManifestEntry("", seg, partition)
    span = getattr(seg, "origin_span", (0.0, 0.0))
    return ManifestEntry(
        getattr(seg, "path", ""), seg.label, partition, getattr(seg, "origin_file", ""),
        float(span[0]), float(span[1]), getattr(seg, "patient_id", None),
    )


def make_split(segments, seed: int, fractions=DEFAULT_FRACTIONS, group_by_patient: bool = False) -> SplitManifest:
    """Seeded stratified split; entries keep the input order.

    ``segments`` may be Segments, ManifestEntries or plain label strings.
    With ``group_by_patient`` every patient lands in a single partition and the
    per-class targets are met greedily rather than exactly.
    """
    fr = _check_fractions(fractions)
    labels = _labels_of(segments)
    if len(labels) < 10:
        raise DataError(f"need at least 10 segments to split, got {len(labels)}")
    for lab in LABELS:
        if lab not in labels:
            raise DataError(f"class {lab!r} has no segments")

    rng = make_rng(seed)
    parts = np.empty(len(labels), dtype=object)
    if group_by_patient:
        _grouped(segments, labels, fr, rng, parts)
    else:
        by_class = [[i for i, lab in enumerate(labels) if lab == c] for c in LABELS]
        alloc = allocate([len(ix) for ix in by_class], fr)
        for idx, counts in zip(by_class, alloc):
            order = rng.permutation(len(idx))
            bounds = np.cumsum([0] + counts)
            for p, name in enumerate(PARTITIONS):
                for j in order[bounds[p]:bounds[p + 1]]:
                    parts[idx[j]] = name
    entries = [_entry(s, str(p)) for s, p in zip(segments, parts)]
    return SplitManifest(int(seed), entries, fr)


def _grouped(segments, labels, fr, rng, parts) -> None:
    patients: dict[str, list[int]] = {}
    for i, seg in enumerate(segments):
        pid = getattr(seg, "patient_id", None)
        if pid is None:
            raise DataError(f"segment {i} has no patient_id; cannot group by patient")
        patients.setdefault(pid, []).append(i)
    totals = Counter(labels)
    have = {(c, p): 0 for c in LABELS for p in range(3)}
    for pid in [sorted(patients)[k] for k in rng.permutation(len(patients))]:
        idx = patients[pid]
        mix = Counter(labels[i] for i in idx)

        def gap(p: int) -> float:
            return sum(fr[p] * totals[c] - have[(c, p)] for c in mix)

        p = max(range(3), key=lambda k: (round(gap(k), 9), -k))
        for c, n in mix.items():
            have[(c, p)] += n
        for i in idx:
            parts[i] = PARTITIONS[p]


def manifest_text(m: SplitManifest) -> str:
    buf = io.StringIO()
    buf.write(MANIFEST_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MANIFEST_COLUMNS)
    for e in m.entries:
        w.writerow([e.segment_path, e.label, e.partition, e.origin_file,
                    f"{e.start_s:.6f}", f"{e.end_s:.6f}", e.patient_id or ""])
    return buf.getvalue()


def write_manifest(path, m: SplitManifest) -> None:
    Path(path).write_text(manifest_text(m), encoding="utf-8")


def parse_manifest(text: str, seed: int = 0, root: Path | None = None) -> SplitManifest:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MANIFEST_HEADER:
        raise DataError(f"manifest must start with {MANIFEST_HEADER!r}")
    rows = list(csv.reader(lines[1:]))
    if not rows or tuple(rows[0]) != MANIFEST_COLUMNS:
        raise DataError(f"manifest columns must be {','.join(MANIFEST_COLUMNS)}")
    entries = []
    for lineno, row in enumerate(rows[1:], start=3):
        if not row:
            continue
        if len(row) != len(MANIFEST_COLUMNS):
            raise DataError(f"manifest line {lineno}: expected {len(MANIFEST_COLUMNS)} fields, got {len(row)}")
        path, label, part, origin, start, end, pid = row
        if label not in LABELS or part not in PARTITIONS:
            raise DataError(f"manifest line {lineno}: bad label {label!r} or partition {part!r}")
        try:
            entries.append(ManifestEntry(path, label, part, origin, float(start), float(end), pid or None))
        except ValueError:
            raise DataError(f"manifest line {lineno}: non-numeric span") from None
    return SplitManifest(seed, entries, root=root)


def read_manifest(path, seed: int = 0) -> SplitManifest:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    return parse_manifest(path.read_text(encoding="utf-8"), seed, root=path.parent)
