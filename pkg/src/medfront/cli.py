"""Command-line driver: ``medfront preprocess|extract|train|eval|compare``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import (
    DATASET_KINDS, DEFAULT_BANDS, PreprocessSettings, collect_segments, load_partition, read_manifest,
    read_wav, write_corpus,
)
from .errors import AnnotationError, ConfigError, DataError, NumericalError, WavParseError
from .evaluation import ConfusionCounts, compare_frontends, metrics, scores_table
from .frontends import FRONTENDS, make_frontend
from .frontends.io import write_features, write_pgm
from .model import (
    ModelConfig, TrainConfig, build_model, load_checkpoint, partition_hash, predict_proba_arrays,
    save_checkpoint, train_arrays,
)

log = logging.getLogger("medfront")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("preprocess", "extract", "train", "eval", "compare")
MEL_RANGES = {"respiratory": (100.0, 2000.0), "heartbeat": (25.0, 1000.0), "synthetic": (100.0, 2000.0)}
COMPARE_ORDER = ("mel", "leaf", "nnaudio")


@dataclass(frozen=True)
class Key:
    kind: str  # str | int | float | bool | list
    default: str
    doc: str


# "auto" defaults resolve from the dataset kind or other keys
KEYS: dict[str, Key] = {
    "dataset": Key("str", "synthetic", "respiratory | heartbeat | synthetic"),
    "corpus_dir": Key("str", "", "directory of .wav files (respiratory: with .txt cycle sidecars)"),
    "labels_csv": Key("str", "", "heartbeat recording labels, rows file,label"),
    "exclude_list": Key("str", "", "heartbeat files to skip, one name per line"),
    "n_synthetic": Key("int", "1000", "recordings in the synthetic corpus"),
    "output_dir": Key("str", "run", "directory for every artifact of the run"),
    "manifest": Key("str", "auto", "manifest path; auto = <output_dir>/manifest.csv"),
    "seed": Key("int", "0", "seed for synthesis, splitting, init, shuffling and dropout"),
    "band_low_hz": Key("float", "auto", "band-pass low edge; auto = 120 (resp/synthetic) or 25 (heartbeat)"),
    "band_high_hz": Key("float", "auto", "band-pass high edge; auto = 1800 (resp/synthetic) or 400 (heartbeat)"),
    "filter_order": Key("int", "12", "Butterworth band-pass order (even)"),
    "sample_rate": Key("int", "4000", "rate after resampling, Hz"),
    "segment_s": Key("float", "2.0", "segment duration after pad/trim, s"),
    "split_train": Key("float", "0.75", "train fraction"),
    "split_val": Key("float", "0.15", "validation fraction"),
    "split_test": Key("float", "0.10", "test fraction"),
    "group_by_patient": Key("bool", "false", "keep each patient within one partition"),
    "frontend": Key("str", "mel", "mel | leaf | nnaudio"),
    "window_ms": Key("float", "30", "analysis window, ms"),
    "hop_ms": Key("float", "10", "frame hop, ms"),
    "n_filters": Key("int", "128", "filters per frame"),
    "fmin_hz": Key("float", "auto", "lowest filter edge; auto = 100 (resp/synthetic) or 25 (heartbeat)"),
    "fmax_hz": Key("float", "auto", "highest filter edge; auto = 2000 (resp/synthetic) or 1000 (heartbeat)"),
    "window_kind": Key("str", "hann", "hann | hamming | rectangular"),
    "n_fft": Key("int", "auto", "FFT size; auto = next power of two >= window"),
    "log_eps": Key("float", "1e-6", "offset inside log compression"),
    "compression": Key("str", "pcen", "LEAF compression: pcen | log"),
    "gabor_length": Key("int", "401", "LEAF Gabor kernel length, samples (odd)"),
    "pcen_alpha": Key("float", "2.0", "PCEN gain exponent init"),
    "pcen_delta": Key("float", "2.0", "PCEN bias init"),
    "pcen_root": Key("float", "4.0", "PCEN root init"),
    "pcen_smooth": Key("float", "0.04", "PCEN smoother coefficient"),
    "pcen_eps": Key("float", "1e-6", "PCEN stabiliser"),
    "architecture": Key("str", "compact", "compact | vgg_style"),
    "conv_blocks": Key("list", "auto", "channels:kernel:pool per block, comma separated; auto = preset"),
    "dense_units": Key("list", "auto", "hidden dense widths, comma separated; auto = preset"),
    "dropout_p": Key("float", "0.5", "dropout before each of the last two dense layers"),
    "activation": Key("str", "relu", "relu | swish"),
    "vgg_width": Key("int", "64", "base width of the vgg_style preset"),
    "epochs": Key("int", "200", "training epochs"),
    "batch_size": Key("int", "64", "mini-batch size"),
    "lr": Key("float", "1e-5", "Adam learning rate"),
    "eval_every": Key("int", "1", "validation cadence, epochs"),
    "early_stop_val_ba": Key("float", "none", "stop once validation balanced accuracy reaches this; none = off"),
    "checkpoint": Key("str", "auto", "checkpoint for eval; auto = <output_dir>/checkpoint_<frontend>.mfck"),
    "checkpoints": Key("list", "auto", "checkpoints for extract/compare; auto = the three per-frontend files"),
    "extract_frontends": Key("list", "mel,leaf,nnaudio", "frontends rendered by extract"),
    "extract_segment": Key("str", "auto", "segment path from the manifest; auto = first test segment"),
}


def _convert(name: str, raw: str):
    key = KEYS[name]
    raw = raw.strip()
    if raw in ("auto", "none") and key.default == raw:
        return None
    try:
        if key.kind == "int":
            return int(raw)
        if key.kind == "float":
            return float(raw)
        if key.kind == "bool":
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if key.kind == "list":
            return [item.strip() for item in raw.split(",") if item.strip()]
    except ValueError:
        raise ConfigError(f"{name}: cannot read {raw!r} as {key.kind}") from None
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment. Unknown keys are rejected."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source} line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in KEYS:
            raise ConfigError(f"{source} line {lineno}: unknown key {k!r}")
        raw[k] = v
    return raw


@dataclass
class RunConfig:
    raw: dict[str, str]

    @classmethod
    def from_text(cls, text: str, source: str = "<config>", seed: int | None = None) -> RunConfig:
        raw = {k: key.default for k, key in KEYS.items()}
        raw.update(parse_config_text(text, source))
        if seed is not None:
            raw["seed"] = str(seed)
        cfg = cls(raw)
        cfg.validate()
        return cfg

    def __getitem__(self, name: str):
        return _convert(name, self.raw[name])

    def validate(self) -> None:
        for name in KEYS:
            self[name]
        if self["dataset"] not in DATASET_KINDS:
            raise ConfigError(f"dataset must be one of {DATASET_KINDS}, got {self['dataset']!r}")
        if self["frontend"] not in FRONTENDS:
            raise ConfigError(f"frontend must be one of {sorted(FRONTENDS)}, got {self['frontend']!r}")
        for fe in self["extract_frontends"]:
            if fe not in FRONTENDS:
                raise ConfigError(f"extract_frontends: unknown frontend {fe!r}")
        try:
            self.settings()
            self.frontend_params()
            self.model_config()
            self.train_config()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None

    def echo(self) -> str:
        lines = [f"# effective configuration (medfront {__version__})"]
        width = max(len(k) for k in KEYS)
        for k, key in KEYS.items():
            lines.append(f"{k:<{width}} = {self.raw[k]:<20} # {key.doc}")
        return "\n".join(lines) + "\n"

    @property
    def out(self) -> Path:
        return Path(self["output_dir"])

    @property
    def manifest_path(self) -> Path:
        return Path(self["manifest"]) if self["manifest"] else self.out / "manifest.csv"

    def band(self) -> tuple[float, float]:
        lo, hi = DEFAULT_BANDS[self["dataset"]]
        return (self["band_low_hz"] if self["band_low_hz"] is not None else lo,
                self["band_high_hz"] if self["band_high_hz"] is not None else hi)

    def settings(self) -> PreprocessSettings:
        return PreprocessSettings(self.band(), self["filter_order"], self["sample_rate"], self["segment_s"])

    def fractions(self) -> tuple[float, float, float]:
        return (self["split_train"], self["split_val"], self["split_test"])

    def frontend_params(self) -> dict:
        lo, hi = MEL_RANGES[self["dataset"]]
        params = {
            "sample_rate": self["sample_rate"], "window_ms": self["window_ms"], "hop_ms": self["hop_ms"],
            "n_filters": self["n_filters"],
            "fmin_hz": self["fmin_hz"] if self["fmin_hz"] is not None else lo,
            "fmax_hz": self["fmax_hz"] if self["fmax_hz"] is not None else min(hi, self["sample_rate"] / 2),
            "window_kind": self["window_kind"], "n_fft": self["n_fft"], "log_eps": self["log_eps"],
            "compression": self["compression"], "gabor_length": self["gabor_length"],
            "pcen_alpha": self["pcen_alpha"], "pcen_delta": self["pcen_delta"], "pcen_root": self["pcen_root"],
            "pcen_smooth": self["pcen_smooth"], "pcen_eps": self["pcen_eps"],
        }
        if params["compression"] not in ("pcen", "log"):
            raise ConfigError(f"compression must be pcen or log, got {params['compression']!r}")
        for name in FRONTENDS:
            make_frontend(name, **params).fit()
        return params

    def model_config(self) -> ModelConfig:
        blocks = None
        if self["conv_blocks"] is not None:
            try:
                blocks = tuple(tuple(int(v) for v in b.split(":")) for b in self["conv_blocks"])
            except ValueError:
                raise ConfigError("conv_blocks entries must look like channels:kernel:pool") from None
            if any(len(b) != 3 for b in blocks):
                raise ConfigError("conv_blocks entries must look like channels:kernel:pool")
        units = None
        if self["dense_units"] is not None:
            try:
                units = tuple(int(u) for u in self["dense_units"])
            except ValueError:
                raise ConfigError("dense_units must be comma-separated integers") from None
        return ModelConfig(self["architecture"], blocks, units, self["dropout_p"], self["activation"],
                           2, self["vgg_width"])

    def train_config(self) -> TrainConfig:
        return TrainConfig(self["epochs"], self["batch_size"], self["lr"], self["seed"], self["frontend"],
                           self["eval_every"], self["early_stop_val_ba"])

    def make_frontend(self, name: str | None = None):
        return make_frontend(name or self["frontend"], **self.frontend_params()).fit()

    def checkpoint_path(self, frontend: str | None = None) -> Path:
        if frontend is None and self["checkpoint"]:
            return Path(self["checkpoint"])
        return self.out / f"checkpoint_{frontend or self['frontend']}.mfck"


# ------------------------------------------------------------------- commands


def _echo(cfg: RunConfig, command: str) -> None:
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / f"effective_{command}.cfg").write_text(cfg.echo(), encoding="utf-8")


def cmd_preprocess(cfg: RunConfig, jobs: int = 1) -> int:
    settings = cfg.settings()
    corpus = cfg["corpus_dir"] or None
    labels = cfg["labels_csv"] or None
    exclude = cfg["exclude_list"] or None
    segments, errors = collect_segments(cfg["dataset"], settings, corpus, labels, exclude,
                                        cfg["n_synthetic"], cfg["seed"], jobs)
    if not segments:
        raise DataError("no usable segments were produced")
    manifest = write_corpus(cfg.out, segments, errors, cfg["seed"], cfg.fractions(), cfg["group_by_patient"])
    if cfg.manifest_path != cfg.out / "manifest.csv":
        cfg.manifest_path.write_text((cfg.out / "manifest.csv").read_text(encoding="utf-8"), encoding="utf-8")
    counts = manifest.counts()
    for part in ("train", "val", "test"):
        log.info("%-5s normal %5d  abnormal %5d", part, counts[("normal", part)], counts[("abnormal", part)])
    if errors:
        log.warning("%d file(s) skipped; see %s", len(errors), cfg.out / "preprocess_errors.txt")
    return EXIT_OK


def _load_manifest(cfg: RunConfig):
    return read_manifest(cfg.manifest_path, cfg["seed"])


def cmd_train(cfg: RunConfig, jobs: int = 1) -> int:
    manifest = _load_manifest(cfg)
    X_tr, y_tr, e_tr = load_partition(manifest, "train")
    X_va, y_va, _ = load_partition(manifest, "val")
    tc = cfg.train_config()
    frontend = cfg.make_frontend()
    n_frames = frontend.transform(X_tr[:1]).shape[1:]
    model = build_model(cfg.model_config(), n_frames, seed=cfg["seed"])
    meta = {"test_partition_sha256": partition_hash(manifest.partition("test"))}
    name = tc.frontend
    result = train_arrays(model, frontend, X_tr, y_tr, X_va, y_va, tc, ids_train=[e.segment_path for e in e_tr],
                          log_path=cfg.out / f"train_log_{name}.csv",
                          checkpoint_path=cfg.out / f"checkpoint_{name}.mfck", checkpoint_meta=meta)
    log.info("best validation balanced accuracy %.2f%% at epoch %d (%d optimizer steps)",
             100 * result.best_val_ba, result.best_epoch, result.steps)
    return EXIT_OK


def _predict_test(ckpt: Path, manifest):
    model, frontend, _, side = load_checkpoint(ckpt)
    X, y, entries = load_partition(manifest, "test")
    expected = side.get("test_partition_sha256")
    if expected is not None and expected != partition_hash(entries):
        raise DataError(f"{ckpt.name} was trained against a different test partition than {manifest.root}")
    proba = predict_proba_arrays(model, frontend, X)
    return frontend.name, proba, y, entries


def cmd_eval(cfg: RunConfig, jobs: int = 1) -> int:
    manifest = _load_manifest(cfg)
    ckpt = cfg.checkpoint_path()
    name, proba, y, entries = _predict_test(ckpt, manifest)
    pred = proba.argmax(axis=1)
    scores = metrics(ConfusionCounts.from_predictions(y, pred))
    table = scores_table({name: scores})
    sys.stdout.write(table)
    (cfg.out / f"eval_{name}.txt").write_text(table, encoding="utf-8")
    rows = ["segment_path,label,prediction,p_abnormal"]
    labels = ("normal", "abnormal")
    rows += [f"{e.segment_path},{e.label},{labels[p]},{q[1]:.6f}" for e, p, q in zip(entries, pred, proba)]
    (cfg.out / f"predictions_{name}.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return EXIT_OK


def _checkpoint_list(cfg: RunConfig, names) -> list[Path]:
    if cfg["checkpoints"] is not None:
        return [Path(p) for p in cfg["checkpoints"]]
    return [cfg.checkpoint_path(n) for n in names]


def cmd_compare(cfg: RunConfig, jobs: int = 1) -> int:
    manifest = _load_manifest(cfg)
    paths = _checkpoint_list(cfg, COMPARE_ORDER)
    if len(paths) != 3:
        raise ConfigError(f"compare needs exactly three checkpoints, got {len(paths)}")
    runs, names, truth, ref = [], [], None, None
    for p in paths:
        name, proba, y, entries = _predict_test(p, manifest)
        key = [e.segment_path for e in entries]
        if ref is not None and key != ref:
            raise DataError("checkpoints were evaluated on different test partitions")
        ref, truth = key, y
        runs.append(proba.argmax(axis=1))
        names.append({"mel": "Mel", "leaf": "LEAF", "nnaudio": "nnAudio"}[name])
    report = compare_frontends(*runs, truth, names=tuple(names))
    rows = {n: metrics(ConfusionCounts.from_predictions(truth, r)) for n, r in zip(names, runs)}
    text = scores_table(rows) + "\n" + report.table()
    sys.stdout.write(text)
    (cfg.out / "comparison.csv").write_text(report.csv(), encoding="utf-8")
    (cfg.out / "comparison.txt").write_text(text, encoding="utf-8")
    return EXIT_OK


def _extract_one(args) -> None:
    name, params, ckpt, samples, out_stem = args
    frontend = make_frontend(name, **params).fit()
    if ckpt is not None:
        _, frontend, _, _ = load_checkpoint(ckpt)
    fm = frontend.feature_map(samples[None, :])
    write_features(f"{out_stem}_{name}.mfft", fm, frontend.tag)
    write_pgm(f"{out_stem}_{name}.pgm", fm.data)


def cmd_extract(cfg: RunConfig, jobs: int = 1) -> int:
    manifest = _load_manifest(cfg)
    target = cfg["extract_segment"]
    if target is None:
        test = manifest.partition("test") or manifest.entries
        target = test[0].segment_path
    entry = next((e for e in manifest.entries if e.segment_path == target), None)
    if entry is None:
        raise DataError(f"segment {target!r} is not in the manifest")
    w = read_wav(manifest.resolve(entry))
    params = cfg.frontend_params()
    if w.sample_rate != params["sample_rate"]:
        raise DataError(f"{target} is at {w.sample_rate} Hz, frontends expect {params['sample_rate']} Hz")
    by_frontend = {}
    for p in _checkpoint_list(cfg, cfg["extract_frontends"]):
        if p.is_file():
            by_frontend[load_checkpoint(p)[1].name] = p
    out_dir = cfg.out / "features"
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = str(out_dir / Path(target).stem)
    jobs_args = []
    for name in cfg["extract_frontends"]:
        ckpt = by_frontend.get(name)
        if ckpt is None and name != "mel":
            log.warning("no checkpoint for %s; using its initial parameters", name)
        jobs_args.append((name, params, ckpt, w.samples, stem))
    if jobs > 1 and len(jobs_args) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_extract_one, jobs_args))
    else:
        for a in jobs_args:
            _extract_one(a)
    for name in cfg["extract_frontends"]:
        log.info("wrote %s_%s.mfft and .pgm", stem, name)
    return EXIT_OK


HANDLERS = {"preprocess": cmd_preprocess, "extract": cmd_extract, "train": cmd_train,
            "eval": cmd_eval, "compare": cmd_compare}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="medfront", description="Learnable audio frontends for medical sound classification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="flat key = value configuration file")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for preprocess/extract")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    try:
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        cfg = RunConfig.from_text(path.read_text(encoding="utf-8"), str(path), args.seed)
        _echo(cfg, args.command)
        return HANDLERS[args.command](cfg, args.jobs)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except NumericalError as exc:
        ids = f" (batch: {', '.join(map(str, exc.batch_ids))})" if exc.batch_ids else ""
        log.error("%s%s", exc, ids)
        return EXIT_NUMERIC
    except (DataError, WavParseError, AnnotationError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
