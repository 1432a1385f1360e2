"""Balanced accuracy, McNemar tests and Holm correction for frontend comparisons."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import stats

EXACT_THRESHOLD = 25
PAIR_ORDER = ((0, 1), (0, 2), (1, 2))
DEFAULT_NAMES = ("Mel", "LEAF", "nnAudio")


@dataclass(frozen=True)
class ConfusionCounts:
    """Binary confusion counts with abnormal as the positive class."""

    tp: int
    fn: int
    tn: int
    fp: int

    def __post_init__(self):
        for k in ("tp", "fn", "tn", "fp"):
            v = getattr(self, k)
            if int(v) != v or v < 0:
                raise ValueError(f"{k} must be a non-negative integer, got {v!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.tn + self.fp

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> ConfusionCounts:
        y_true = np.asarray(y_true).astype(bool)
        y_pred = np.asarray(y_pred).astype(bool)
        if y_true.shape != y_pred.shape:
            raise ValueError(f"truth has shape {y_true.shape}, predictions {y_pred.shape}")
        return cls(
            tp=int(np.sum(y_true & y_pred)), fn=int(np.sum(y_true & ~y_pred)),
            tn=int(np.sum(~y_true & ~y_pred)), fp=int(np.sum(~y_true & y_pred)),
        )


@dataclass(frozen=True)
class Scores:
    balanced_accuracy: float
    tpr: float
    tnr: float

    def as_percent(self) -> tuple[str, str, str]:
        return tuple(format_percent(v) for v in (self.balanced_accuracy, self.tpr, self.tnr))


def metrics(c: ConfusionCounts) -> Scores:
    """TPR, TNR and their mean, as fractions."""
    if c.tp + c.fn == 0:
        raise ValueError("no positive (abnormal) cases; balanced accuracy is undefined")
    if c.tn + c.fp == 0:
        raise ValueError("no negative (normal) cases; balanced accuracy is undefined")
    tpr = c.tp / (c.tp + c.fn)
    tnr = c.tn / (c.tn + c.fp)
    return Scores((tpr + tnr) / 2.0, tpr, tnr)


def balanced_accuracy(y_true, y_pred) -> float:
    return metrics(ConfusionCounts.from_predictions(y_true, y_pred)).balanced_accuracy


def format_percent(x: float) -> str:
    return f"{100.0 * x:.2f}"


def format_p(p: float) -> str:
    """Four significant digits; scientific notation below 1e-3."""
    if p < 1e-3:
        return f"{p:.3e}"
    return f"{p:#.4g}"


@dataclass(frozen=True)
class McNemarResult:
    b: int
    c: int
    statistic: float
    p_value: float
    method: str


def mcnemar_counts(b: int, c: int) -> McNemarResult:
    """Exact binomial test when b + c < 25, else chi-squared with continuity correction.

    For the exact variant the reported statistic is min(b, c). The continuity
    correction is floored at zero, so b == c gives statistic 0 and p = 1.
    """
    if b < 0 or c < 0:
        raise ValueError(f"discordant counts must be non-negative, got {b}, {c}")
    n = b + c
    if n < EXACT_THRESHOLD:
        k = min(b, c)
        p = min(1.0, 2.0 * stats.binom.cdf(k, n, 0.5)) if n else 1.0
        return McNemarResult(b, c, float(k), float(p), "exact")
    stat = max(abs(b - c) - 1.0, 0.0) ** 2 / n
    return McNemarResult(b, c, float(stat), float(stats.chi2.sf(stat, 1)), "chi2_cc")


def mcnemar(preds_a, preds_b, truth) -> McNemarResult:
    a = np.asarray(preds_a)
    bb = np.asarray(preds_b)
    t = np.asarray(truth)
    if not (a.shape == bb.shape == t.shape) or a.ndim != 1:
        raise ValueError(f"prediction and truth vectors must match: {a.shape}, {bb.shape}, {t.shape}")
    ok_a = a == t
    ok_b = bb == t
    return mcnemar_counts(int(np.sum(ok_a & ~ok_b)), int(np.sum(~ok_a & ok_b)))


def holm_correct(p_values) -> list[float]:
    """Holm step-down adjusted p-values, in the input order."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.size and (np.any(p < 0) or np.any(p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    adjusted = np.minimum(1.0, (m - np.arange(m)) * p[order])
    adjusted = np.maximum.accumulate(adjusted)
    out = np.empty(m)
    out[order] = adjusted
    return out.tolist()


@dataclass(frozen=True)
class PairResult:
    pair: str
    test: McNemarResult
    p_holm: float
    significant: bool


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[PairResult, ...]
    alpha: float = 0.05

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pair", "b", "c", "statistic", "p_raw", "p_holm", "significant"])
        for r in self.rows:
            w.writerow([r.pair, r.test.b, r.test.c, f"{r.test.statistic:.6g}",
                        format_p(r.test.p_value), format_p(r.p_holm), str(r.significant).lower()])
        return buf.getvalue()

    def table(self) -> str:
        names = [r.pair for r in self.rows]
        width = max(12, *(len(n) for n in names)) + 2
        head = "".join(f"{n:>{width}}" for n in names)
        raw = "".join(f"{format_p(r.test.p_value):>{width}}" for r in self.rows)
        adj = "".join(f"{format_p(r.p_holm) + ('*' if r.significant else ''):>{width}}" for r in self.rows)
        return "\n".join([f"{'':<8}{head}", f"{'p raw':<8}{raw}", f"{'p Holm':<8}{adj}"]) + "\n"


def compare_frontends(run_a, run_b, run_c, truth, names=DEFAULT_NAMES, alpha: float = 0.05) -> ComparisonReport:
    """Pairwise McNemar tests over three prediction vectors, Holm-corrected as one family."""
    runs = (run_a, run_b, run_c)
    tests = [mcnemar(runs[i], runs[j], truth) for i, j in PAIR_ORDER]
    adjusted = holm_correct([t.p_value for t in tests])
    rows = tuple(
        PairResult(f"{names[i]}-{names[j]}", t, p, p < alpha)
        for (i, j), t, p in zip(PAIR_ORDER, tests, adjusted)
    )
    return ComparisonReport(rows, alpha)


def scores_table(rows: dict[str, Scores]) -> str:
    """Three-column Balanced Accuracy / TPR / TNR table in percent."""
    width = max(8, *(len(k) for k in rows))
    lines = [f"{'%':<{width}}  {'Balanced Accuracy':>17}  {'TPR':>6}  {'TNR':>6}"]
    for name, s in rows.items():
        ba, tpr, tnr = s.as_percent()
        lines.append(f"{name:<{width}}  {ba:>17}  {tpr:>6}  {tnr:>6}")
    return "\n".join(lines) + "\n"
