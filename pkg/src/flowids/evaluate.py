"""Confusion matrices, TPR/FPR metrics, threshold sweeps, comparison tables."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts at one decision threshold; a score >= threshold predicts malicious."""

    tp: int
    fp: int
    tn: int
    fn: int
    threshold: float

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def tpr(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else math.nan

    @property
    def fnr(self) -> float:
        d = self.tp + self.fn
        return self.fn / d if d else math.nan

    @property
    def fpr(self) -> float:
        d = self.fp + self.tn
        return self.fp / d if d else math.nan

    @property
    def tnr(self) -> float:
        d = self.fp + self.tn
        return self.tn / d if d else math.nan

    def percent_rows(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """Row-normalized percentages: rows are true class, columns predicted.

        Row order (benign, malicious); column order (predicted benign,
        predicted malicious). Rows with no members are (nan, nan).
        """
        return (
            (100.0 * self.tnr, 100.0 * self.fpr),
            (100.0 * self.fnr, 100.0 * self.tpr),
        )

    def to_text(self) -> str:
        def pct(x: float) -> str:
            return "n/a" if math.isnan(x) else f"{x:6.2f}%"

        def rate(x: float) -> str:
            return "n/a" if math.isnan(x) else f"{x:.6f}"

        (bb, bm), (mb, mm) = self.percent_rows()
        return "\n".join(
            [
                f"threshold\t{self.threshold!r}",
                f"counts\tTP={self.tp}\tFP={self.fp}\tTN={self.tn}\tFN={self.fn}\tN={self.n}",
                f"rates\tTPR={rate(self.tpr)}\tFPR={rate(self.fpr)}\tTNR={rate(self.tnr)}\tFNR={rate(self.fnr)}",
                "percent (rows: true class, columns: predicted benign | predicted malicious)",
                f"  true benign    \t{pct(bb)}\t{pct(bm)}",
                f"  true malicious \t{pct(mb)}\t{pct(mm)}",
            ]
        ) + "\n"


def confusion(
    labels: Sequence[int] | np.ndarray,
    scores: Sequence[float] | np.ndarray,
    threshold: float,
) -> ConfusionMatrix:
    """Confusion counts for score-above-threshold classification.

    Ties classify as malicious (predicted malicious iff score >= threshold).
    """
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise ValueError(f"labels {labels.shape} and scores {scores.shape} must be equal-length vectors")
    if labels.size == 0:
        raise ValueError("empty input")
    pred = scores >= threshold
    actual = labels == 1
    tp = int(np.count_nonzero(pred & actual))
    fp = int(np.count_nonzero(pred & ~actual))
    fn = int(np.count_nonzero(~pred & actual))
    tn = int(np.count_nonzero(~pred & ~actual))
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn, threshold=float(threshold))


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    tpr: float
    fpr: float
    fp: int
    fn: int


@dataclass(frozen=True)
class ThresholdCurve:
    """Confusion sweep: TPR and FPR are non-increasing in the threshold."""

    points: tuple[CurvePoint, ...]

    def tpr_series(self) -> list[tuple[float, float]]:
        return [(p.threshold, p.tpr) for p in self.points]

    def fpr_series(self) -> list[tuple[float, float]]:
        return [(p.threshold, p.fpr) for p in self.points]

    def to_text(self) -> str:
        lines = ["threshold\ttpr\tfpr\tfp\tfn"]
        for p in self.points:
            lines.append(f"{p.threshold:.17g}\t{p.tpr:.6f}\t{p.fpr:.6f}\t{p.fp}\t{p.fn}")
        return "\n".join(lines) + "\n"


def sweep(
    labels: Sequence[int] | np.ndarray,
    scores: Sequence[float] | np.ndarray,
    thresholds: Sequence[float],
) -> ThresholdCurve:
    """One confusion matrix per threshold; thresholds must strictly increase."""
    thresholds = list(thresholds)
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be sorted in strictly increasing order")
    points = []
    for t in thresholds:
        cm = confusion(labels, scores, t)
        points.append(CurvePoint(threshold=float(t), tpr=cm.tpr, fpr=cm.fpr, fp=cm.fp, fn=cm.fn))
    return ThresholdCurve(tuple(points))


def quantile_thresholds(scores: Sequence[float] | np.ndarray, n: int = 201) -> list[float]:
    """Strictly increasing thresholds at evenly spaced score quantiles."""
    qs = np.quantile(np.asarray(scores, dtype=float), np.linspace(0.0, 1.0, n))
    return [float(v) for v in np.unique(qs)]


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    tpr: float
    fpr: float
    cited: bool


#: Published reference results on the large public CSV flow dataset. These are
#: fixed cited values for side-by-side context, never recomputed here.
REFERENCE_RESULTS: tuple[ComparisonRow, ...] = (
    ComparisonRow("Hybrid IDS (decision tree + rules)", 0.94475, 0.01145, True),
    ComparisonRow("WISARD", 0.48175, 0.02865, True),
    ComparisonRow("Forest PA", 0.92920, 0.03550, True),
    ComparisonRow("J48 Consolidated", 0.92020, 0.06645, True),
    ComparisonRow("LIBSVM", 0.54595, 0.05130, True),
    ComparisonRow("FURIA", 0.90500, 0.03165, True),
    ComparisonRow("Random Forest", 0.93050, 0.01880, True),
    ComparisonRow("REP Tree", 0.91640, 0.04835, True),
    ComparisonRow("MLP", 0.77830, 0.07350, True),
    ComparisonRow("Naive Bayes", 0.82510, 0.33455, True),
    ComparisonRow("JRip", 0.93400, 0.04470, True),
    ComparisonRow("J48", 0.91990, 0.05040, True),
    ComparisonRow("DNN with IPs", 0.9993, 0.0003, True),
    ComparisonRow("DNN without IPs", 0.9677, 0.0052, True),
)


def compare_report(runs: Sequence[tuple[str, ConfusionMatrix]]) -> tuple[ComparisonRow, ...]:
    """This artifact's runs followed by the fixed cited reference rows."""
    if not runs:
        raise ValueError("compare_report needs at least one run")
    rows = [ComparisonRow(name, cm.tpr, cm.fpr, False) for name, cm in runs]
    return tuple(rows) + REFERENCE_RESULTS


def comparison_to_text(rows: Sequence[ComparisonRow]) -> str:
    width = max(len(r.name) for r in rows)
    lines = [f"{'technique'.ljust(width)}\tTPR\tFPR\tsource"]
    for r in rows:
        src = "cited" if r.cited else "this run"
        lines.append(f"{r.name.ljust(width)}\t{r.tpr:.5f}\t{r.fpr:.5f}\t{src}")
    return "\n".join(lines) + "\n"
