"""Corpus ingestion: WAV and annotation parsing, segmentation, splitting, manifests."""

from .pipeline import (
    DATASET_KINDS, DEFAULT_BANDS, PreprocessSettings, collect_segments, load_partition,
    preprocess_segment, write_corpus,
)
from .segments import LABELS, CycleAnnotation, Segment, label_index, parse_cycle_annotations, segment_by_cycles, segment_fixed
from .split import (
    PARTITIONS, ManifestEntry, SplitManifest, allocate, make_split, manifest_text, parse_manifest,
    read_manifest, write_manifest,
)
from .synthetic import synthetic_corpus, synthetic_recording
from .wav import parse_wav, read_wav, wav_bytes, write_wav

__all__ = [
    "DATASET_KINDS", "DEFAULT_BANDS", "LABELS", "PARTITIONS", "CycleAnnotation", "ManifestEntry",
    "PreprocessSettings", "Segment", "SplitManifest", "allocate", "collect_segments", "label_index",
    "load_partition", "make_split", "manifest_text", "parse_cycle_annotations", "parse_manifest",
    "parse_wav", "preprocess_segment", "read_manifest", "read_wav", "segment_by_cycles", "segment_fixed",
    "synthetic_corpus", "synthetic_recording", "wav_bytes", "write_corpus", "write_manifest", "write_wav",
]
