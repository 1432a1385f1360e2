"""Acceptance suite: one PASS/FAIL line per criterion, collected into the pytest summary."""

import filecmp
import time
from math import comb
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE
from gradcases import ALL_CASES
from medfront.autodiff import Tensor
from medfront.autodiff.gradcheck import max_relative_error
from medfront.cli import main
from medfront.datasets import PreprocessSettings, allocate, collect_segments, label_index, make_split
from medfront.evaluation import ConfusionCounts, compare_frontends, holm_correct, mcnemar_counts, metrics
from medfront.frontends import FrontendConfig, init_nnaudio, make_frontend, mel_frontend, nnaudio_frontend, pcen
from medfront.model import ModelConfig, TrainConfig, build_model, train_arrays
from medfront.signal import Waveform, design_butterworth_bandpass, fft, stft, window


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE.append(line)
    assert ok, line


def naive_dft(x):
    k = np.arange(len(x))
    return np.exp(-2j * np.pi * np.outer(k, k) / len(x)) @ x


def test_1_metric_arithmetic():
    s = metrics(ConfusionCounts(tp=92, fn=21, tn=64, fp=17))
    got = s.as_percent()
    report(1, got == ("80.21", "81.42", "79.01"), f"BA/TPR/TNR = {'/'.join(got)} (tp 92/113, tn 64/81)")


def test_2_fft_and_stft_oracles():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(200):
        n = 2 ** int(rng.integers(0, 11))
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        ref = naive_dft(x)
        worst = max(worst, np.max(np.abs(fft(x) - ref)) / max(np.max(np.abs(ref)), 1e-300))
    x = rng.standard_normal(8000)
    spec = stft(Waveform(x, 4000))
    win = window("hann", 120)
    stft_worst = 0.0
    for i in range(spec.frames.shape[0]):
        ref = naive_dft(np.pad(x[40 * i : 40 * i + 120] * win, (0, 8)))[:65]
        stft_worst = max(stft_worst, np.max(np.abs(spec.frames[i] - ref)) / np.max(np.abs(ref)))
    report(2, worst <= 1e-9 and stft_worst <= 1e-9,
           f"FFT worst rel err {worst:.1e}, STFT worst rel err {stft_worst:.1e} (tol 1e-9)")


def test_3_butterworth_contract():
    fs, details, ok = 4000, [], True
    for lo, hi in [(120.0, 1800.0), (25.0, 400.0)]:
        c = design_butterworth_bandpass(12, lo, hi, fs)
        stable = c.sections.shape == (6, 5) and bool(np.all(np.abs(c.poles()) < 1))
        edges = 20 * np.log10(np.abs(c.frequency_response(np.array([lo, hi]))))
        # the upper decade lies above Nyquist, so it is taken on the bilinear-warped axis
        up = fs / np.pi * np.arctan(10 * np.tan(np.pi * hi / fs))
        stop = 20 * np.log10(np.abs(c.frequency_response(np.array([lo / 10, up]))))
        ok &= stable and bool(np.all(np.abs(edges + 3) <= 0.5)) and bool(np.all(stop <= -60))
        details.append(f"[{lo:g},{hi:g}] edges {edges[0]:.2f}/{edges[1]:.2f} dB, stop {stop.max():.0f} dB")
    report(3, ok, "; ".join(details))


def test_4_gradient_suite():
    t0 = time.perf_counter()
    worst, bad = 0.0, []
    for name, build in sorted(ALL_CASES.items()):
        for i in range(50):
            fn, params = build(np.random.default_rng([4, i]))
            err = max_relative_error(fn, params, h=1e-5, seed=i)
            worst = max(worst, err)
            if err > 1e-3:
                bad.append(f"{name}#{i}")
    report(4, not bad, f"{len(ALL_CASES)} cases x 50 configs, worst rel err {worst:.1e}, "
                       f"{time.perf_counter() - t0:.0f} s" + (f", failing {bad[:5]}" if bad else ""))


def test_5_cross_frontend_consistency():
    rng = np.random.default_rng(5)
    cfg = FrontendConfig()
    p = init_nnaudio(cfg)
    worst = 0.0
    for _ in range(50):
        w = Waveform(rng.standard_normal(8000) * rng.uniform(0.01, 2), 4000)
        worst = max(worst, np.max(np.abs(nnaudio_frontend(w, p, cfg).data - mel_frontend(w, cfg).data)))
    x = rng.standard_normal((1, 8000))
    shapes = {n: make_frontend(n).fit().transform(x).shape[1:] for n in ("mel", "leaf", "nnaudio")}
    ok = worst <= 1e-6 and set(shapes.values()) == {(198, 128)}
    report(5, ok, f"nnAudio-vs-mel max abs diff {worst:.1e}; frames {sorted(set(shapes.values()))}")


def test_6_pcen_gain_invariance():
    e = np.random.default_rng(6).uniform(0.1, 5.0, (1, 400, 8))
    kw = dict(alpha=np.ones(8), delta=np.zeros(8), root=np.full(8, 4.0), eps=1e-12)
    base = pcen(Tensor(e), **kw).values[:, 100:]
    worst = max(np.max(np.abs(pcen(Tensor(c * e), **kw).values[:, 100:] - base) / np.abs(base))
                for c in (0.1, 10, 1000))
    report(6, worst < 1e-3, f"max relative change {worst:.1e} over c in {{0.1, 10, 1000}} (tol 1e-3)")


@pytest.fixture(scope="module")
def smoke_corpus():
    segs, _ = collect_segments("synthetic", PreprocessSettings((120, 1800)), n_synthetic=1000, seed=7)
    parts = np.array([e.partition for e in make_split(segs, 7).entries])
    X = np.stack([s.waveform.samples for s in segs])
    y = np.array([label_index(s.label) for s in segs])
    return {p: (X[parts == p], y[parts == p]) for p in ("train", "val", "test")}


@pytest.mark.slow
@pytest.mark.parametrize("name", ["mel", "leaf", "nnaudio"])
def test_7_end_to_end_learning(smoke_corpus, name):
    (X_tr, y_tr), (X_va, y_va) = smoke_corpus["train"], smoke_corpus["val"]
    fe = make_frontend(name).fit()
    start = np.concatenate([t.values.ravel() for t in fe.parameters()]) if fe.parameters() else np.zeros(0)
    model = build_model(ModelConfig(), (198, 128), seed=7)
    t0 = time.perf_counter()
    r = train_arrays(model, fe, X_tr, y_tr, X_va, y_va,
                     TrainConfig(epochs=30, lr=1e-3, seed=7, frontend=name, early_stop_val_ba=0.95))
    if fe.parameters():
        moved = np.linalg.norm(np.concatenate([t.values.ravel() for t in fe.parameters()]) - start)
        change = f"|param change| {moved:.2e}"
    else:
        moved, change = np.inf, "no learnable params"
    ok = r.best_val_ba >= 0.95 and moved > 1e-6
    report(7, ok, f"{name}: val BA {100 * r.best_val_ba:.2f}% at epoch {r.best_epoch}, "
                  f"{change}, {time.perf_counter() - t0:.0f} s")


def test_8_statistics_oracles():
    n, k = 20, 5
    oracle = 2 * sum(comb(n, i) for i in range(k + 1)) / 2**n
    p = mcnemar_counts(5, 15).p_value
    holm = holm_correct([0.01, 0.04, 0.03])
    pred = np.array([0, 1, 1, 0, 1, 0, 0, 1])
    rep = compare_frontends(pred, pred, pred, np.array([0, 1, 0, 0, 1, 1, 0, 1]))
    ok = (abs(p - oracle) <= 1e-6 and np.allclose(holm, [0.03, 0.06, 0.06], atol=1e-12)
          and all(r.test.p_value == 1.0 and r.p_holm == 1.0 for r in rep.rows))
    report(8, ok, f"McNemar(5,15) p={p:.6f} (oracle {oracle:.6f}); Holm {np.round(holm, 6).tolist()}; "
                  "identical runs p=1")


def test_9_split_bookkeeping():
    table = {"respiratory": ([3642, 3256], [[2732, 546, 364], [2442, 488, 326]]),
             "heartbeat": ([27281, 7045], [[20461, 4092, 2728], [5284, 1057, 704]])}
    ok, details = True, []
    for name, (totals, want) in table.items():
        labels = ["normal"] * totals[0] + ["abnormal"] * totals[1]
        c = make_split(labels, seed=9).counts()
        got = [[c[(lab, part)] for part in ("train", "val", "test")] for lab in ("normal", "abnormal")]
        dev = int(np.max(np.abs(np.array(got) - want)))
        ok &= dev <= 1 and allocate(totals, (0.75, 0.15, 0.10)) == got
        details.append(f"{name} {got} (max dev {dev})")
    report(9, ok, "; ".join(details))


def _pipeline(out: Path) -> None:
    cfg = out / "run.cfg"
    out.mkdir()
    cfg.write_text(f"dataset = synthetic\nn_synthetic = 30\noutput_dir = {out}\nseed = 11\n"
                   "epochs = 2\nlr = 1e-3\ngabor_length = 101\n", encoding="utf-8")
    assert main(["preprocess", "--config", str(cfg)]) == 0
    for fe in ("mel", "leaf", "nnaudio"):
        text = cfg.read_text(encoding="utf-8")
        (out / f"{fe}.cfg").write_text(text + f"frontend = {fe}\n", encoding="utf-8")
        assert main(["train", "--config", str(out / f"{fe}.cfg")]) == 0
    assert main(["compare", "--config", str(cfg)]) == 0


def test_10_pipeline_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    _pipeline(a)
    _pipeline(b)
    names = ["manifest.csv", "comparison.csv"]
    names += [f"{kind}_{fe}.{ext}" for fe in ("mel", "leaf", "nnaudio")
              for kind, ext in (("train_log", "csv"), ("checkpoint", "mfck"), ("checkpoint", "json"))]
    names += sorted(str(p.relative_to(a)) for p in (a / "segments").glob("*.wav"))
    same, diff, missing = filecmp.cmpfiles(a, b, names, shallow=False)
    report(10, not diff and not missing and len(same) == len(names),
           f"{len(same)}/{len(names)} artifacts byte-identical (manifest, logs, checkpoints, report, segments)")
