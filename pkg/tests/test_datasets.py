import logging
import struct
from collections import Counter

import numpy as np
import pytest

from medfront.datasets import (
    CycleAnnotation, PreprocessSettings, Segment, allocate, collect_segments, label_index, load_partition,
    make_split, manifest_text, parse_cycle_annotations, parse_manifest, parse_wav, preprocess_segment,
    read_manifest, read_wav, segment_by_cycles, segment_fixed, synthetic_corpus, wav_bytes, write_corpus,
    write_wav,
)
from medfront.errors import AnnotationError, DataError, WavParseError
from medfront.signal import Waveform


def riff(fmt_body: bytes, data: bytes, extra: bytes = b"") -> bytes:
    chunks = b"fmt " + struct.pack("<I", len(fmt_body)) + fmt_body + extra
    chunks += b"data" + struct.pack("<I", len(data)) + data + (b"\x00" if len(data) & 1 else b"")
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks


def pcm_fmt(channels=1, rate=4000, bits=16, codec=1):
    block = channels * bits // 8
    return struct.pack("<HHIIHH", codec, channels, rate, rate * block, block, bits)


# ------------------------------------------------------------------------- WAV

def test_pcm16_scaling():
    w = parse_wav(riff(pcm_fmt(), np.array([32767, -32768, 0], "<i2").tobytes()))
    np.testing.assert_allclose(w.samples, [32767 / 32768, -1.0, 0.0])
    assert w.samples[0] == pytest.approx(0.99997, abs=1e-5)
    assert w.sample_rate == 4000


def test_stereo_is_averaged():
    frames = np.array([[16384, -16384]] * 5, "<i2").tobytes()
    w = parse_wav(riff(pcm_fmt(channels=2), frames))
    np.testing.assert_array_equal(w.samples, np.zeros(5))


def test_float_pcm24_and_extensible():
    data = np.array([0.25, -0.5], "<f4").tobytes()
    np.testing.assert_allclose(parse_wav(riff(pcm_fmt(bits=32, codec=3), data)).samples, [0.25, -0.5])
    p24 = bytes([0x00, 0x00, 0x40, 0x00, 0x00, 0xC0])  # +2^22, -2^22
    np.testing.assert_allclose(parse_wav(riff(pcm_fmt(bits=24), p24)).samples, [0.5, -0.5])
    ext = struct.pack("<HHIIHHHHIH", 0xFFFE, 1, 4000, 8000, 2, 16, 22, 16, 0, 1) + b"\x00" * 14
    np.testing.assert_allclose(parse_wav(riff(ext, np.array([16384], "<i2").tobytes())).samples, [0.5])


def test_unknown_chunks_and_odd_padding_are_skipped():
    extra = b"LIST" + struct.pack("<I", 3) + b"abc\x00"
    w = parse_wav(riff(pcm_fmt(), np.array([8192], "<i2").tobytes(), extra))
    np.testing.assert_allclose(w.samples, [0.25])


@pytest.mark.parametrize("raw,msg", [
    (b"RIFF", "too short"),
    (b"RIFX\x00\x00\x00\x00WAVE", "signature"),
    (riff(pcm_fmt(bits=8), b"\x00\x01"), "unsupported codec"),
    (b"RIFF\x04\x00\x00\x00WAVE", "no fmt chunk"),
])
def test_malformed_wavs(raw, msg):
    with pytest.raises(WavParseError, match=msg) as exc:
        parse_wav(raw)
    assert "offset" in str(exc.value) or msg == "unsupported codec"


def test_wav_roundtrip(tmp_path, rng):
    w = Waveform(rng.uniform(-0.9, 0.9, 101), 4000)
    write_wav(tmp_path / "a.wav", w)
    back = read_wav(tmp_path / "a.wav")
    np.testing.assert_array_equal(back.samples, w.samples.astype(np.float32))
    assert back.source_id == "a.wav"
    pcm = parse_wav(wav_bytes(w, "pcm16"))
    assert np.max(np.abs(pcm.samples - w.samples)) <= 1 / 32768


# ----------------------------------------------------------------- annotations

def test_parse_annotations_examples():
    assert parse_cycle_annotations("0.077\t1.411\t0\t0") == [CycleAnnotation(0.077, 1.411, False, False)]
    assert parse_cycle_annotations("") == []
    anns = parse_cycle_annotations("0 1 1 1\n\n1 2 0 1\n2 3 1 0\n3 4 0 0\n")
    assert [a.label for a in anns] == ["abnormal", "abnormal", "abnormal", "normal"]


@pytest.mark.parametrize("text,line,msg", [
    ("1.0 0.5 0 0", 1, "not after"),
    ("0 1 0 0\nx 2 0 0", 2, "non-numeric"),
    ("0 1 2 0", 1, "0 or 1"),
    ("0 1 0", 1, "4 fields"),
])
def test_annotation_errors_name_the_line(text, line, msg):
    with pytest.raises(AnnotationError, match=rf"line {line}: .*{msg}"):
        parse_cycle_annotations(text)


def test_segment_by_cycles_example():
    fs = 4000
    w = Waveform(np.zeros(int(8.97 * fs)), fs, "101_1b1_Al_sc_Meditron.wav")
    anns = parse_cycle_annotations("0.077 1.411 0 0\n1.411 3.863 1 0\n3.863 6.601 0 1\n6.601 8.97 1 1\n")
    segs = segment_by_cycles(w, anns, patient_id="101")
    assert len(segs) == 4
    assert [s.label for s in segs] == ["normal", "abnormal", "abnormal", "abnormal"]
    assert segs[0].origin_span == (0.077, 1.411) and segs[0].origin_file == "101_1b1_Al_sc_Meditron.wav"
    assert len(segs[0].waveform) == round(1.411 * fs) - round(0.077 * fs)


def test_segment_by_cycles_clips_overhang(caplog):
    w = Waveform(np.zeros(4000), 4000, "x.wav")
    with caplog.at_level(logging.WARNING):
        segs = segment_by_cycles(w, [CycleAnnotation(0.5, 1.5, False, False), CycleAnnotation(2.0, 3.0, True, False)])
    assert len(segs) == 1 and segs[0].origin_span == (0.5, 1.0)
    assert "overhangs" in caplog.text


@pytest.mark.parametrize("seconds,count", [(10, 5), (2, 1), (5, 3)])
def test_segment_fixed_counts(seconds, count):
    segs = segment_fixed(Waveform(np.zeros(seconds * 4000), 4000, "h.wav"), label="abnormal")
    assert len(segs) == count
    assert all(s.label == "abnormal" for s in segs)
    assert segs[-1].origin_span[1] == seconds


def test_label_index():
    assert label_index("normal") == 0 and label_index("abnormal") == 1
    with pytest.raises(ValueError):
        label_index("unsure")


# ---------------------------------------------------------------------- splits

def test_allocate_reproduces_corpus_table():
    assert allocate([3642, 3256], (0.75, 0.15, 0.10)) == [[2732, 546, 364], [2442, 488, 326]]


def test_allocate_small_example():
    assert allocate([5, 5], (0.8, 0.1, 0.1)) == [[4, 1, 0], [4, 0, 1]]


def test_split_small_example_and_determinism():
    labels = ["normal"] * 5 + ["abnormal"] * 5
    m = make_split(labels, seed=3, fractions=(0.8, 0.1, 0.1))
    c = m.counts()
    assert c[("normal", "train")] == 4 and c[("abnormal", "train")] == 4
    assert Counter(e.partition for e in m.entries) == {"train": 8, "val": 1, "test": 1}
    assert manifest_text(m) == manifest_text(make_split(labels, seed=3, fractions=(0.8, 0.1, 0.1)))
    assert [e.label for e in m.entries] == labels


def test_split_is_stratified_and_seed_dependent(rng):
    labels = list(rng.choice(["normal", "abnormal"], 237))
    a, b = make_split(labels, 1), make_split(labels, 2)
    assert [e.partition for e in a.entries] != [e.partition for e in b.entries]
    n = Counter(labels)
    for lab in ("normal", "abnormal"):
        for part, f in zip(("train", "val", "test"), (0.75, 0.15, 0.10)):
            assert abs(a.counts()[(lab, part)] - f * n[lab]) <= 1


def test_split_errors():
    with pytest.raises(DataError, match="at least 10"):
        make_split(["normal", "abnormal"] * 4, 0)
    with pytest.raises(DataError, match="no segments"):
        make_split(["normal"] * 12, 0)
    with pytest.raises(ValueError, match="fractions"):
        make_split(["normal", "abnormal"] * 6, 0, (0.5, 0.5, 0.5))


def test_grouped_split_keeps_patients_together(rng):
    w = Waveform(np.zeros(10), 4000)
    segs = [Segment(w, str(rng.choice(["normal", "abnormal"])), f"{p}.wav", (0, 1), str(p))
            for p in rng.integers(0, 30, 300)]
    m = make_split(segs, 0, group_by_patient=True)
    by_patient = {}
    for s, e in zip(segs, m.entries):
        by_patient.setdefault(s.patient_id, set()).add(e.partition)
    assert all(len(p) == 1 for p in by_patient.values())
    with pytest.raises(DataError, match="patient_id"):
        make_split([Segment(w, "normal", "", (0, 1))] * 5 + [Segment(w, "abnormal", "", (0, 1))] * 5, 0,
                   group_by_patient=True)


def test_manifest_roundtrip_and_errors(tmp_path):
    w = Waveform(np.zeros(10), 4000)
    segs = [Segment(w, lab, f"f{i}.wav", (0.077, 1.411), "p1" if i % 2 else None, f"segments/f{i}_000.wav")
            for i, lab in enumerate(["normal", "abnormal"] * 6)]
    m = make_split(segs, 9)
    text = manifest_text(m)
    assert text.splitlines()[:2] == ["medfront-manifest v1",
                                     "segment_path,label,partition,origin_file,start_s,end_s,patient_id"]
    assert text.splitlines()[2].startswith("segments/f0_000.wav,normal,")
    assert text.splitlines()[2].endswith(",f0.wav,0.077000,1.411000,")
    back = parse_manifest(text, seed=9)
    assert back.entries == m.entries
    (tmp_path / "manifest.csv").write_text(text)
    assert read_manifest(tmp_path / "manifest.csv").root == tmp_path
    with pytest.raises(DataError, match="must start"):
        parse_manifest("a,b\n")
    with pytest.raises(DataError, match="line 3"):
        parse_manifest(text.splitlines()[0] + "\n" + text.splitlines()[1] + "\nx,bogus,train,,0,0,\n")


# ------------------------------------------------------------ corpus pipeline

def test_synthetic_corpus_is_seeded_and_balanced():
    a, b = synthetic_corpus(20, 4), synthetic_corpus(20, 4)
    assert [s.label for s in a] == [s.label for s in b]
    assert all(np.array_equal(x.waveform.samples, y.waveform.samples) for x, y in zip(a, b))
    assert Counter(s.label for s in a) == {"normal": 10, "abnormal": 10}
    assert a[3].origin_file == "synthetic_00003" and a[0].waveform.sample_rate == 8000
    assert not np.array_equal(synthetic_corpus(20, 5)[0].waveform.samples, a[0].waveform.samples)


@pytest.mark.parametrize("seconds,rate", [(1.2, 44100), (3.0, 8000), (2.0, 4000)])
def test_preprocess_gives_exact_duration(rng, seconds, rate):
    seg = Segment(Waveform(rng.standard_normal(int(seconds * rate)), rate), "normal", "x.wav", (0, seconds))
    out = preprocess_segment(seg, PreprocessSettings((120, 1800)))
    assert out.waveform.sample_rate == 4000 and len(out.waveform) == 8000
    assert np.all(np.isfinite(out.waveform.samples))


def test_preprocess_logs_source_rate(rng, caplog):
    seg = Segment(Waveform(rng.standard_normal(4000), 2000), "normal", "h.wav", (0, 2))
    with caplog.at_level(logging.DEBUG, logger="medfront.datasets.pipeline"):
        preprocess_segment(seg, PreprocessSettings((25, 400)))
    assert "source rate 2000 Hz" in caplog.text


def write_respiratory_corpus(root, rng):
    root.mkdir()
    for k in range(4):
        write_wav(root / f"10{k}_1b1_Al_sc_Meditron.wav", Waveform(0.1 * rng.standard_normal(44100 * 6), 44100))
        (root / f"10{k}_1b1_Al_sc_Meditron.txt").write_text("0.077\t1.411\t0\t0\n1.411\t3.863\t1\t0\n3.863\t5.9\t0\t1\n")
    (root / "bad.wav").write_bytes(b"RIFF")
    return root


def test_respiratory_corpus_to_manifest(tmp_path, rng):
    root = write_respiratory_corpus(tmp_path / "icbhi", rng)
    segs, errors = collect_segments("respiratory", PreprocessSettings((120, 1800)), root)
    assert len(segs) == 12 and len(errors) == 1 and errors[0].startswith("bad.wav:")
    assert {s.patient_id for s in segs} == {"100", "101", "102", "103"}
    m = write_corpus(tmp_path / "out", segs, errors, seed=0)
    assert (tmp_path / "out" / "preprocess_errors.txt").read_text().startswith("bad.wav")
    X, y, entries = load_partition(read_manifest(tmp_path / "out" / "manifest.csv"), "train")
    assert X.shape == (len(m.partition("train")), 8000)
    assert list(y) == [label_index(e.label) for e in entries]
    assert entries[0].segment_path.startswith("segments/10")


def test_heartbeat_corpus_uses_labels_and_exclusions(tmp_path, rng):
    root = tmp_path / "pcg"
    root.mkdir()
    for name in ("a", "b", "c", "d"):
        write_wav(root / f"{name}.wav", Waveform(0.1 * rng.standard_normal(2000 * 5), 2000))
    (tmp_path / "labels.csv").write_text("file,label\na.wav,normal\nb,abnormal\nc,normal\n")
    (tmp_path / "unsure.txt").write_text("c.wav\n")
    segs, errors = collect_segments("heartbeat", PreprocessSettings((25, 400)), root,
                                    tmp_path / "labels.csv", tmp_path / "unsure.txt")
    assert [s.origin_file for s in segs] == ["a.wav"] * 3 + ["b.wav"] * 3
    assert errors == ["d.wav: no label in labels.csv"]
    with pytest.raises(DataError, match="labels CSV"):
        collect_segments("heartbeat", PreprocessSettings((25, 400)), root)


def test_collect_errors(tmp_path):
    with pytest.raises(DataError, match="not found"):
        collect_segments("respiratory", PreprocessSettings((120, 1800)), tmp_path / "missing")
    with pytest.raises(DataError, match="kind"):
        collect_segments("ecg", PreprocessSettings((120, 1800)))
