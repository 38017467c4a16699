"""ROC/AUC, score histograms and mean/std summaries.

Orientation is fixed: a higher score means "more anomalous". Labels are
the strings ``"normal"`` and ``"anomaly"``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

NORMAL = "normal"
ANOMALY = "anomaly"
LABELS = (NORMAL, ANOMALY)


class SingleClassError(ValueError):
    """Raised when ROC/AUC is requested for data holding only one label."""


@dataclass(frozen=True)
class ScoreRecord:
    id: str
    label: str
    score: float

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {self.label!r}")
        if not math.isfinite(self.score):
            raise ValueError(f"score for {self.id!r} is not finite: {self.score}")


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts_normal: np.ndarray
    counts_anomaly: np.ndarray


def _split(records: Iterable[ScoreRecord]) -> tuple[np.ndarray, np.ndarray]:
    records = list(records)
    pos = np.array([r.score for r in records if r.label == ANOMALY], dtype=np.float64)
    neg = np.array([r.score for r in records if r.label == NORMAL], dtype=np.float64)
    if len(pos) == 0 or len(neg) == 0:
        raise SingleClassError(
            f"need both classes, got {len(neg)} normal and {len(pos)} anomaly records"
        )
    return pos, neg


def records_from_arrays(scores: Sequence[float], labels: Sequence) -> list[ScoreRecord]:
    """Build records from parallel arrays; truthy / "anomaly" labels mean anomaly."""
    out = []
    for i, (s, lab) in enumerate(zip(scores, labels)):
        if isinstance(lab, str):
            label = lab
        else:
            label = ANOMALY if lab else NORMAL
        out.append(ScoreRecord(str(i), label, float(s)))
    return out


def roc_curve(records: Iterable[ScoreRecord]) -> RocCurve:
    """ROC with one point per distinct score, AUC by the trapezoidal rule.

    Tied scores form a single step, which contributes a diagonal segment
    (i.e. ties count one half, as in the pairwise definition). The first
    point has threshold +inf and sits at (0, 0).
    """
    pos, neg = _split(records)
    scores = np.concatenate([pos, neg])
    is_pos = np.concatenate([np.ones(len(pos), bool), np.zeros(len(neg), bool)])
    order = np.argsort(-scores, kind="stable")
    scores, is_pos = scores[order], is_pos[order]
    # last index of each run of equal scores
    ends = np.r_[np.nonzero(np.diff(scores))[0], len(scores) - 1]
    tp = np.cumsum(is_pos)[ends]
    fp = (ends + 1) - tp
    tp = np.r_[0, tp]
    fp = np.r_[0, fp]
    # integrate in integer units to keep rounding to the final division
    area2 = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    auc = area2 / (2.0 * len(pos) * len(neg))
    return RocCurve(
        fpr=fp / len(neg),
        tpr=tp / len(pos),
        thresholds=np.r_[np.inf, scores[ends]],
        auc=auc,
    )


def auc_pairwise(records: Iterable[ScoreRecord]) -> float:
    """(concordant + 0.5 * tied) / (n_anomaly * n_normal), by brute force."""
    pos, neg = _split(records)
    diff = pos[:, None] - neg[None, :]
    twice = 2 * int(np.count_nonzero(diff > 0)) + int(np.count_nonzero(diff == 0))
    return twice / (2.0 * len(pos) * len(neg))


def histogram(records: Iterable[ScoreRecord], n_bins: int = 30) -> Histogram:
    """Equal-width bins spanning [min, max]; the maximum falls in the last bin."""
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    records = list(records)
    if not records:
        raise ValueError("histogram of no records")
    scores = np.array([r.score for r in records], dtype=np.float64)
    lo, hi = scores.min(), scores.max()
    if hi == lo:
        edges = np.linspace(lo, lo + 1.0, n_bins + 1)
    else:
        edges = np.linspace(lo, hi, n_bins + 1)
    idx = np.searchsorted(edges, scores, side="right") - 1
    idx = np.clip(idx, 0, n_bins - 1)
    labels = np.array([r.label for r in records])
    counts_n = np.bincount(idx[labels == NORMAL], minlength=n_bins)
    counts_a = np.bincount(idx[labels == ANOMALY], minlength=n_bins)
    return Histogram(edges, counts_n, counts_a)


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float
    n: int
    n_infinite: int

    def __str__(self):
        text = f"{self.mean:.1f} (standard deviation: {self.std:.1f})"
        if self.n_infinite:
            text += f" [{self.n_infinite} infinite value(s) excluded]"
        return text


def summarize(values: Iterable[float]) -> Summary:
    """Mean and population std of the finite values; +inf entries are counted and dropped."""
    vals = np.asarray(list(values), dtype=np.float64)
    if np.any(np.isnan(vals)) or np.any(vals == -np.inf):
        raise ValueError("summarize accepts finite values and +inf only")
    n_inf = int(np.count_nonzero(vals == np.inf))
    finite = vals[np.isfinite(vals)]
    if len(finite) < 2:
        raise ValueError(f"need at least 2 finite values, got {len(finite)}")
    return Summary(float(finite.mean()), float(finite.std()), len(finite), n_inf)
