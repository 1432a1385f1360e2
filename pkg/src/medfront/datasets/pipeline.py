"""Corpus ingestion: segment, filter, resample, pad, split, write."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..errors import DataError, MedfrontError
from ..signal import BiquadCascade, apply_filter, design_butterworth_bandpass, fit_duration, resample
from .segments import LABELS, Segment, label_index, parse_cycle_annotations, segment_by_cycles, segment_fixed
from .split import DEFAULT_FRACTIONS, SplitManifest, make_split, write_manifest
from .synthetic import synthetic_corpus
from .wav import read_wav, wav_bytes

log = logging.getLogger(__name__)

DATASET_KINDS = ("respiratory", "heartbeat", "synthetic")
DEFAULT_BANDS = {"respiratory": (120.0, 1800.0), "heartbeat": (25.0, 400.0), "synthetic": (120.0, 1800.0)}
FILTER_ORDER = 12
TARGET_RATE = 4000
SEGMENT_SECONDS = 2.0
SYNTHETIC_RATE = 8000


@dataclass(frozen=True)
class PreprocessSettings:
    band: tuple[float, float]
    filter_order: int = FILTER_ORDER
    target_rate: int = TARGET_RATE
    duration_s: float = SEGMENT_SECONDS


@lru_cache(maxsize=32)
def _cascade(order: int, low: float, high: float, rate: int) -> BiquadCascade:
    return design_butterworth_bandpass(order, low, high, rate)


def preprocess_segment(seg: Segment, settings: PreprocessSettings) -> Segment:
    """Band-pass at the source rate, resample, then pad or trim to the target duration."""
    lo, hi = settings.band
    log.debug("%s: source rate %d Hz, resampling to %d Hz", seg.origin_file, seg.waveform.sample_rate,
              settings.target_rate)
    w = apply_filter(_cascade(settings.filter_order, lo, hi, seg.waveform.sample_rate), seg.waveform)
    w = resample(w, settings.target_rate)
    w = fit_duration(w, settings.duration_s)
    return replace(seg, waveform=w)


def respiratory_patient(stem: str) -> str:
    # ICBHI names start with the patient number: 101_1b1_Al_sc_Meditron
    return stem.split("_", 1)[0]


def read_label_csv(path) -> dict[str, str]:
    """``file,label`` rows keyed by file stem."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (lineno == 1 and row[0].strip().lower() == "file"):
                continue
            if len(row) != 2:
                raise DataError(f"{path} line {lineno}: expected file,label")
            name, label = row[0].strip(), row[1].strip()
            if label not in LABELS:
                raise DataError(f"{path} line {lineno}: label must be normal or abnormal, got {label!r}")
            out[Path(name).stem] = label
    return out


def read_exclusions(path) -> set[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return {Path(line.strip()).stem for line in lines if line.strip()}


def _respiratory_job(args) -> tuple[list[Segment], str | None]:
    wav_path, settings = args
    try:
        w = read_wav(wav_path)
        ann_path = Path(wav_path).with_suffix(".txt")
        if not ann_path.is_file():
            raise DataError(f"missing annotation sidecar {ann_path.name}")
        anns = parse_cycle_annotations(ann_path.read_text(encoding="utf-8"))
        stem = Path(wav_path).stem
        raw = segment_by_cycles(w, anns, Path(wav_path).name, respiratory_patient(stem))
        return [preprocess_segment(s, settings) for s in raw], None
    except (MedfrontError, OSError, ValueError) as exc:
        return [], f"{Path(wav_path).name}: {exc}"


def _heartbeat_job(args) -> tuple[list[Segment], str | None]:
    wav_path, label, settings = args
    try:
        w = read_wav(wav_path)
        raw = segment_fixed(w, settings.duration_s, label, Path(wav_path).name)
        return [preprocess_segment(s, settings) for s in raw], None
    except (MedfrontError, OSError, ValueError) as exc:
        return [], f"{Path(wav_path).name}: {exc}"


def _run_jobs(fn, jobs_args: list, n_jobs: int) -> list:
    if n_jobs <= 1 or len(jobs_args) <= 1:
        return [fn(a) for a in jobs_args]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, jobs_args, chunksize=max(1, len(jobs_args) // (4 * n_jobs))))


def collect_segments(
    kind: str, settings: PreprocessSettings, corpus_dir=None, labels_csv=None, exclude=None,
    n_synthetic: int = 1000, seed: int = 0, n_jobs: int = 1,
) -> tuple[list[Segment], list[str]]:
    """Preprocessed segments for one corpus plus per-file error messages."""
    if kind not in DATASET_KINDS:
        raise DataError(f"dataset kind must be one of {DATASET_KINDS}, got {kind!r}")
    if kind == "synthetic":
        raw = synthetic_corpus(n_synthetic, seed, SYNTHETIC_RATE, settings.duration_s, settings.band)
        return [preprocess_segment(s, settings) for s in raw], []

    if corpus_dir is None or not Path(corpus_dir).is_dir():
        raise DataError(f"corpus directory not found: {corpus_dir}")
    wavs = sorted(Path(corpus_dir).glob("*.wav"))
    if not wavs:
        raise DataError(f"no .wav files in {corpus_dir}")
    if kind == "respiratory":
        results = _run_jobs(_respiratory_job, [(p, settings) for p in wavs], n_jobs)
        errors = []
    else:
        if labels_csv is None:
            raise DataError("heartbeat corpus needs a labels CSV (file,label)")
        labels = read_label_csv(labels_csv)
        skip = read_exclusions(exclude) if exclude else set()
        args, errors = [], []
        for p in wavs:
            if p.stem in skip:
                continue
            if p.stem not in labels:
                errors.append(f"{p.name}: no label in {Path(labels_csv).name}")
                continue
            args.append((p, labels[p.stem], settings))
        results = _run_jobs(_heartbeat_job, args, n_jobs)
    segments = []
    for segs, err in results:
        segments.extend(segs)
        if err:
            errors.append(err)
    return segments, errors


def assign_paths(segments: list[Segment], subdir: str = "segments") -> list[Segment]:
    counts: dict[str, int] = {}
    out = []
    for seg in segments:
        stem = Path(seg.origin_file).stem or "segment"
        k = counts.get(stem, 0)
        counts[stem] = k + 1
        out.append(replace(seg, path=f"{subdir}/{stem}_{k:03d}.wav"))
    return out


def write_corpus(
    out_dir, segments: list[Segment], errors: list[str], seed: int,
    fractions=DEFAULT_FRACTIONS, group_by_patient: bool = False,
) -> SplitManifest:
    """Write segment WAVs, ``manifest.csv`` and ``preprocess_errors.txt``."""
    out_dir = Path(out_dir)
    segments = assign_paths(segments)
    manifest = make_split(segments, seed, fractions, group_by_patient)
    manifest.root = out_dir
    (out_dir / "segments").mkdir(parents=True, exist_ok=True)
    for seg in segments:
        (out_dir / seg.path).write_bytes(wav_bytes(seg.waveform))
    write_manifest(out_dir / "manifest.csv", manifest)
    (out_dir / "preprocess_errors.txt").write_text("".join(e + "\n" for e in errors), encoding="utf-8")
    for e in errors:
        log.warning("skipped %s", e)
    return manifest


def load_partition(manifest: SplitManifest, partition: str) -> tuple[np.ndarray, np.ndarray, list]:
    """(signals (n, samples), labels (n,) with abnormal = 1, entries)."""
    entries = manifest.partition(partition)
    if not entries:
        raise DataError(f"partition {partition!r} is empty")
    signals = []
    rate = None
    for e in entries:
        path = manifest.resolve(e)
        if not path.is_file():
            raise DataError(f"segment file missing: {path}")
        w = read_wav(path)
        if rate is not None and w.sample_rate != rate:
            raise DataError(f"{path} has rate {w.sample_rate}, expected {rate}")
        rate = w.sample_rate
        signals.append(w.samples)
    lengths = {len(s) for s in signals}
    if len(lengths) != 1:
        raise DataError(f"segments in {partition!r} have differing lengths {sorted(lengths)}")
    y = np.array([label_index(e.label) for e in entries], dtype=np.int64)
    return np.stack(signals), y, entries
