"""Pixel-level evaluation: AP, AuROC, FPR at fixed TPR, F1, and the
maximal-detection-margin score, in exact (sort-based) and binned
(streaming sufficient-statistics) modes.

Conventions, pinned for reproducibility:
  - ties share one operating point (AP) and get half credit (AuROC);
  - FPR at TPR uses the first crossing, no interpolation;
  - IGNORE pixels are removed before any computation;
  - dataset-level scores pool pixels across images (binned stats merge
    associatively, so any reduction tree gives identical results).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateLabels,
    DimensionMismatch,
    GridMismatch,
    NoPositives,
    RangeViolation,
)
from .model import ANOMALY, IGNORE, AnomalyMap, LabelMap

DEFAULT_BINS = 4096


@dataclass(frozen=True)
class ScoredPixels:
    """Flat scores with binary labels; IGNORE pixels already removed."""

    scores: np.ndarray  # float64 in [0, 1]
    labels: np.ndarray  # uint8 in {0, 1}

    def __post_init__(self):
        scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if scores.ndim != 1 or labels.ndim != 1 or len(scores) != len(labels):
            raise DimensionMismatch(
                f"scores ({scores.shape}) and labels ({labels.shape}) must be equal-length 1-d arrays"
            )
        if len(scores) and not (np.all(scores >= 0.0) and np.all(scores <= 1.0)):
            raise RangeViolation("scores must lie in [0, 1]")
        if np.any(labels > 1):
            raise RangeViolation("labels must be 0 or 1")
        scores.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_maps(cls, pred: AnomalyMap, truth: LabelMap) -> "ScoredPixels":
        if (pred.height, pred.width) != (truth.height, truth.width):
            raise DimensionMismatch(
                f"prediction {pred.values.shape} does not match truth {truth.values.shape}"
            )
        keep = truth.values != IGNORE
        return cls(pred.values[keep], (truth.values[keep] == ANOMALY).astype(np.uint8))

    @classmethod
    def concatenate(cls, parts) -> "ScoredPixels":
        parts = list(parts)
        return cls(
            np.concatenate([p.scores for p in parts]) if parts else np.empty(0),
            np.concatenate([p.labels for p in parts]) if parts else np.empty(0, dtype=np.uint8),
        )

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def n_negative(self) -> int:
        return len(self.labels) - self.n_positive


def _tie_groups(data: ScoredPixels):
    """Cumulative (tp, fp) and per-group positive/negative counts at the end
    of each score-tie group, highest scores first."""
    order = np.argsort(-data.scores, kind="stable")
    s = data.scores[order]
    y = data.labels[order].astype(np.int64)
    last = np.empty(len(s), dtype=bool)
    last[-1] = True
    last[:-1] = s[:-1] != s[1:]
    cum_tp = np.cumsum(y)[last]
    cum_n = np.flatnonzero(last) + 1
    cum_fp = cum_n - cum_tp
    pos = np.diff(np.concatenate(([0], cum_tp)))
    neg = np.diff(np.concatenate(([0], cum_fp)))
    return s[last], cum_tp, cum_fp, pos, neg


@dataclass(frozen=True)
class ThresholdStats:
    """Per-bin positive/negative score counts on a uniform grid over [0, 1].

    Sufficient statistics for the binned metric modes; merging is an
    elementwise integer sum, hence associative and commutative.
    """

    pos: np.ndarray  # int64, length B
    neg: np.ndarray  # int64, length B

    def __post_init__(self):
        pos = np.ascontiguousarray(self.pos, dtype=np.int64)
        neg = np.ascontiguousarray(self.neg, dtype=np.int64)
        if pos.ndim != 1 or pos.shape != neg.shape or len(pos) < 1:
            raise DimensionMismatch("stats need equal-length 1-d count arrays")
        if np.any(pos < 0) or np.any(neg < 0):
            raise RangeViolation("counts must be non-negative")
        pos.flags.writeable = False
        neg.flags.writeable = False
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "neg", neg)

    @property
    def bins(self) -> int:
        return len(self.pos)

    @classmethod
    def empty(cls, bins: int = DEFAULT_BINS) -> "ThresholdStats":
        return cls(np.zeros(bins, dtype=np.int64), np.zeros(bins, dtype=np.int64))

    @classmethod
    def from_scored(cls, data: ScoredPixels, bins: int = DEFAULT_BINS) -> "ThresholdStats":
        idx = np.minimum((data.scores * bins).astype(np.int64), bins - 1)
        return cls(
            np.bincount(idx[data.labels == 1], minlength=bins),
            np.bincount(idx[data.labels == 0], minlength=bins),
        )

    def _descending(self):
        """Cumulative counts walking bins from high scores to low."""
        pos = self.pos[::-1]
        neg = self.neg[::-1]
        return np.cumsum(pos), np.cumsum(neg), pos, neg


def merge_stats(a: ThresholdStats, b: ThresholdStats) -> ThresholdStats:
    if a.bins != b.bins:
        raise GridMismatch(f"cannot merge stats with {a.bins} and {b.bins} bins")
    return ThresholdStats(a.pos + b.pos, a.neg + b.neg)


def _check_mode(mode: str):
    if mode not in ("exact", "binned"):
        raise ValueError(f"mode must be 'exact' or 'binned', got {mode!r}")


def _ap_from_groups(cum_tp, cum_fp, pos) -> float:
    total = cum_tp[-1] if len(cum_tp) else 0
    if total == 0:
        raise NoPositives("average precision needs at least one positive label")
    hit = pos > 0
    precision = cum_tp[hit] / (cum_tp[hit] + cum_fp[hit])
    return float(np.sum(pos[hit] * precision) / total)


def _auroc_from_groups(cum_tp, cum_fp, pos, neg) -> float:
    total_pos = cum_tp[-1] if len(cum_tp) else 0
    total_neg = cum_fp[-1] if len(cum_fp) else 0
    if total_pos == 0 or total_neg == 0:
        raise DegenerateLabels("AuROC needs at least one positive and one negative label")
    # each positive outranks the negatives scored strictly below it and
    # half-credits the negatives tied with it
    wins = pos * ((total_neg - cum_fp) + 0.5 * neg)
    return float(np.sum(wins) / (total_pos * total_neg))


def _fpr_from_groups(cum_tp, cum_fp, tpr_target) -> float:
    total_pos = cum_tp[-1] if len(cum_tp) else 0
    total_neg = cum_fp[-1] if len(cum_fp) else 0
    if total_pos == 0 or total_neg == 0:
        raise DegenerateLabels("FPR at TPR needs at least one positive and one negative label")
    tpr = cum_tp / total_pos
    first = int(np.argmax(tpr >= tpr_target))  # guaranteed since tpr ends at 1
    return float(cum_fp[first] / total_neg)


def average_precision(data: ScoredPixels, mode: str = "exact", bins: int = DEFAULT_BINS) -> float:
    _check_mode(mode)
    if mode == "binned":
        return ap_from_stats(ThresholdStats.from_scored(data, bins))
    _, cum_tp, cum_fp, pos, _ = _tie_groups(data)
    return _ap_from_groups(cum_tp, cum_fp, pos)


def auroc(data: ScoredPixels, mode: str = "exact", bins: int = DEFAULT_BINS) -> float:
    _check_mode(mode)
    if mode == "binned":
        return auroc_from_stats(ThresholdStats.from_scored(data, bins))
    _, cum_tp, cum_fp, pos, neg = _tie_groups(data)
    return _auroc_from_groups(cum_tp, cum_fp, pos, neg)


def fpr_at_tpr(data: ScoredPixels, tpr_target: float = 0.95, mode: str = "exact", bins: int = DEFAULT_BINS) -> float:
    _check_mode(mode)
    if mode == "binned":
        return fpr_at_tpr_from_stats(ThresholdStats.from_scored(data, bins), tpr_target)
    _, cum_tp, cum_fp, _, _ = _tie_groups(data)
    return _fpr_from_groups(cum_tp, cum_fp, tpr_target)


def ap_from_stats(stats: ThresholdStats) -> float:
    cum_tp, cum_fp, pos, _ = stats._descending()
    return _ap_from_groups(cum_tp, cum_fp, pos)


def auroc_from_stats(stats: ThresholdStats) -> float:
    cum_tp, cum_fp, pos, neg = stats._descending()
    return _auroc_from_groups(cum_tp, cum_fp, pos, neg)


def fpr_at_tpr_from_stats(stats: ThresholdStats, tpr_target: float = 0.95) -> float:
    cum_tp, cum_fp, _, _ = stats._descending()
    return _fpr_from_groups(cum_tp, cum_fp, tpr_target)


def _f1(tp: float, fp: float, fn: float) -> float:
    denom = 2.0 * tp + fp + fn
    return 0.0 if denom == 0.0 else 2.0 * tp / denom


def f1_at_threshold(pred: AnomalyMap, truth: LabelMap, t: float) -> float:
    """F1 of the binarization (pred > t) against anomaly pixels."""
    data = ScoredPixels.from_maps(pred, truth)
    hot = data.scores > np.float64(t)
    pos = data.labels == 1
    tp = float(np.count_nonzero(hot & pos))
    fp = float(np.count_nonzero(hot & ~pos))
    fn = float(np.count_nonzero(~hot & pos))
    return _f1(tp, fp, fn)


def _grid_f1(data: ScoredPixels, grid: int) -> np.ndarray:
    """F1 of (scores > k/grid) for k = 1..grid-1, via two sorted passes."""
    pos_sorted = np.sort(data.scores[data.labels == 1])
    neg_sorted = np.sort(data.scores[data.labels == 0])
    ts = np.arange(1, grid, dtype=np.float64) / np.float64(grid)
    tp = len(pos_sorted) - np.searchsorted(pos_sorted, ts, side="right")
    fp = len(neg_sorted) - np.searchsorted(neg_sorted, ts, side="right")
    fn = len(pos_sorted) - tp
    denom = 2.0 * tp + fp + fn
    with np.errstate(invalid="ignore"):
        f1 = np.where(denom == 0, 0.0, 2.0 * tp / np.where(denom == 0, 1, denom))
    return f1


def _longest_run(qualifies: np.ndarray) -> int:
    if not qualifies.any():
        return 0
    padded = np.concatenate(([False], qualifies, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return int(np.max(edges[1::2] - edges[0::2]))


def mdm_from_scored(data: ScoredPixels, margin: float, grid: int = 256) -> float:
    """Maximal detection margin on pre-flattened pixels.

    Evaluates F1 at thresholds k/grid (k = 1..grid-1) and returns the
    longest consecutive run with F1 strictly above the margin, divided by
    the grid size. 0 when no threshold qualifies.
    """
    if grid < 2:
        raise ValueError(f"grid must be >= 2, got {grid}")
    f1 = _grid_f1(data, grid)
    return _longest_run(f1 > np.float64(margin)) / grid


def mdm(pred: AnomalyMap, truth: LabelMap, margin: float, grid: int = 256) -> float:
    """Maximal detection margin of a prediction map against ground truth."""
    return mdm_from_scored(ScoredPixels.from_maps(pred, truth), margin, grid)


def pr_curve(data: ScoredPixels):
    """(threshold, precision, recall) at each operating point, high to low."""
    thresholds, cum_tp, cum_fp, _, _ = _tie_groups(data)
    total = cum_tp[-1] if len(cum_tp) else 0
    if total == 0:
        raise NoPositives("precision-recall curve needs at least one positive label")
    precision = cum_tp / (cum_tp + cum_fp)
    recall = cum_tp / total
    return thresholds, precision, recall


def roc_curve(data: ScoredPixels):
    """(threshold, fpr, tpr) at each operating point, high to low."""
    thresholds, cum_tp, cum_fp, _, _ = _tie_groups(data)
    total_pos = cum_tp[-1] if len(cum_tp) else 0
    total_neg = cum_fp[-1] if len(cum_fp) else 0
    if total_pos == 0 or total_neg == 0:
        raise DegenerateLabels("ROC curve needs at least one positive and one negative label")
    return thresholds, cum_fp / total_neg, cum_tp / total_pos
