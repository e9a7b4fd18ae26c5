"""Offline query mining over a validation set.

Produces the anomalous-query set (by average IoU with anomaly ground
truth), specialized-query reports, the preset inlier set (by IoU with
road/ground predictions), and the mask-count sweep backing the
hyperparameter study.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import metrics
from .errors import DimensionMismatch, InconsistentQueryCount, InvalidBins
from .heatmap import Toggles, accept_map, combine, reject_borders, reject_map, select_inlier_queries
from .model import (
    IGNORE,
    HyperParams,
    QueryIndexSet,
    as_query_indices,
    dominant_query,
)


@dataclass(frozen=True)
class QueryIoUReport:
    """Per-query average IoU with a pixel set, plus contributing image counts."""

    avg_iou: np.ndarray       # float64, length N, values in [0, 1]
    image_counts: np.ndarray  # int64, length N

    @property
    def n_queries(self) -> int:
        return len(self.avg_iou)


@dataclass(frozen=True)
class SpecializationReport:
    """Per-query dominant class and how often it is predicted confidently.

    dominant_class is -1 for queries that never predict any class with
    probability >= 1 - eps.
    """

    dominant_class: np.ndarray  # int64, length N
    fraction: np.ndarray        # float64, length N
    specialized: np.ndarray     # bool, length N


def _check_bundles(bundles, truths):
    bundles = list(bundles)
    truths = list(truths)
    if len(bundles) != len(truths):
        raise DimensionMismatch(f"{len(bundles)} bundles but {len(truths)} truth maps")
    if not bundles:
        raise DimensionMismatch("need at least one bundle")
    n = bundles[0][0].n_queries
    for i, (masks, probs) in enumerate(bundles):
        if masks.n_queries != n or probs.n_queries != n:
            raise InconsistentQueryCount(
                f"bundle {i} has N={masks.n_queries}/{probs.n_queries}, expected {n}"
            )
        t = truths[i]
        if (masks.height, masks.width) != (t.height, t.width):
            raise DimensionMismatch(
                f"bundle {i} is {masks.height}x{masks.width} but truth is {t.height}x{t.width}"
            )
    return bundles, truths, n


def _avg_region_iou(bundles, target_maps) -> QueryIoUReport:
    """Average IoU of each query's dominant region with target pixels (==1).

    IGNORE pixels are excluded from both sets. An image with no target
    pixels is skipped for queries whose region is empty there, and counts
    as IoU 0 for the rest.
    """
    bundles, target_maps, n = _check_bundles(bundles, target_maps)
    iou_sum = np.zeros(n, dtype=np.float64)
    count = np.zeros(n, dtype=np.int64)
    for (masks, _probs), tmap in zip(bundles, target_maps):
        region = dominant_query(masks)
        valid = tmap.values != IGNORE
        target = tmap.values == 1
        region_size = np.bincount(region[valid].ravel(), minlength=n)
        inter = np.bincount(region[target].ravel(), minlength=n)
        n_target = int(np.count_nonzero(target))
        union = region_size + n_target - inter
        contributes = (region_size > 0) | (n_target > 0)
        with np.errstate(invalid="ignore", divide="ignore"):
            iou = np.where(contributes, inter / np.maximum(union, 1), 0.0)
        iou_sum += iou
        count += contributes
    avg = np.where(count > 0, iou_sum / np.maximum(count, 1), 0.0)
    return QueryIoUReport(avg, count)


def query_anomaly_iou(bundles, truths) -> QueryIoUReport:
    """Average IoU of each query's dominant region with anomaly ground truth."""
    return _avg_region_iou(bundles, truths)


def select_anomalous_queries(report: QueryIoUReport, t_iou: float) -> QueryIndexSet:
    """Queries with average IoU >= t_iou, ordered by descending IoU.

    The ordering feeds the mask-count sweep; ties keep ascending index order.
    """
    order = np.argsort(-report.avg_iou, kind="stable")
    kept = [int(q) for q in order if report.avg_iou[q] >= t_iou]
    return QueryIndexSet(tuple(kept))


def specialized_queries(probs_per_image, t_query: float, eps: float) -> SpecializationReport:
    """Find queries that confidently predict one fixed class across images.

    A query is specialized iff its most frequent confident class (probability
    >= 1 - eps) appears in strictly more than t_query of the images.
    """
    probs_per_image = list(probs_per_image)
    if not probs_per_image:
        raise DimensionMismatch("need at least one probability set")
    n = probs_per_image[0].n_queries
    c1 = probs_per_image[0].values.shape[1]
    counts = np.zeros((n, c1), dtype=np.int64)
    for i, probs in enumerate(probs_per_image):
        if probs.n_queries != n:
            raise InconsistentQueryCount(f"probability set {i} has N={probs.n_queries}, expected {n}")
        if probs.values.shape[1] != c1:
            raise DimensionMismatch(f"probability set {i} has {probs.values.shape[1]} classes, expected {c1}")
        rows = probs.values
        confident = rows.max(axis=1).astype(np.float64) >= np.float64(1.0) - np.float64(eps)
        cls = rows.argmax(axis=1)
        np.add.at(counts, (np.flatnonzero(confident), cls[confident]), 1)
    best = counts.max(axis=1)
    dominant = np.where(best > 0, counts.argmax(axis=1), -1)
    fraction = best / float(len(probs_per_image))
    return SpecializationReport(
        dominant_class=dominant.astype(np.int64),
        fraction=fraction,
        specialized=fraction > np.float64(t_query),
    )


def ground_query_init(bundles, road_maps, t_ground: float = 0.3) -> QueryIndexSet:
    """Preset inlier queries: dominant regions that track road predictions.

    road_maps are binary maps (1 = road-like prediction, 255 = ignore).
    Returns queries with average IoU >= t_ground, ascending index order.
    """
    report = _avg_region_iou(bundles, road_maps)
    kept = np.flatnonzero(report.avg_iou >= np.float64(t_ground))
    return QueryIndexSet(tuple(int(q) for q in kept))


def rank_sweep(
    ordered_anomalous,
    bundles,
    truths,
    hyper: HyperParams = HyperParams(),
    n_max: int = 16,
    preset_inliers=(),
    toggles: Toggles = Toggles(),
    mode: str = "exact",
    bins: int = metrics.DEFAULT_BINS,
    backend: str | None = None,
):
    """Evaluate the pipeline with the top-n anomalous queries for n = 1..n_max.

    Returns one row per n with pooled AP, FPR95, and AuROC. The reject side
    does not depend on the anomalous set, so it is computed once per image.
    """
    ordered = as_query_indices(ordered_anomalous)
    bundles, truths, _n = _check_bundles(bundles, truths)
    n_max = min(n_max, len(ordered))
    if n_max < 1:
        raise DimensionMismatch("sweep needs at least one anomalous query")

    lam = hyper.lam if toggles.accept else 1.0
    rejects = []
    for masks, probs in bundles:
        if toggles.reject:
            preset = preset_inliers if toggles.init else ()
            inliers = select_inlier_queries(probs, hyper.t_mask, preset)
            rej = reject_map(masks, probs, inliers, backend=backend)
            if toggles.borders:
                rej = reject_borders(rej, masks, inliers, hyper.t_border, hyper.eps_border, backend=backend)
        else:
            rej = None
        rejects.append(rej)

    rows = []
    for n in range(1, n_max + 1):
        top = QueryIndexSet(ordered.indices[:n])
        parts = []
        for (masks, probs), rej, truth in zip(bundles, rejects, truths):
            acc = accept_map(masks, probs, top, backend=backend)
            if rej is None:
                out = acc
            else:
                out = combine(rej, acc, lam)
            parts.append(metrics.ScoredPixels.from_maps(out, truth))
        pooled = metrics.ScoredPixels.concatenate(parts)
        rows.append(
            {
                "n": n,
                "ap": metrics.average_precision(pooled, mode=mode, bins=bins),
                "fpr95": metrics.fpr_at_tpr(pooled, 0.95, mode=mode, bins=bins),
                "auroc": metrics.auroc(pooled, mode=mode, bins=bins),
            }
        )
    return rows


def iou_histogram(report: QueryIoUReport, bin_edges, top_k: int = 16) -> np.ndarray:
    """Histogram of the top_k highest per-query average IoUs.

    bin_edges must be strictly increasing within [0, 1]; the last bin is
    right-inclusive, as usual for histograms.
    """
    edges = np.asarray(bin_edges, dtype=np.float64)
    if edges.ndim != 1 or len(edges) < 2:
        raise InvalidBins("need at least two bin edges")
    if np.any(np.diff(edges) <= 0):
        raise InvalidBins("bin edges must be strictly increasing")
    if edges[0] < 0.0 or edges[-1] > 1.0:
        raise InvalidBins("bin edges must lie within [0, 1]")
    top = np.sort(report.avg_iou)[::-1][:top_k]
    counts, _ = np.histogram(top, bins=edges)
    return counts.astype(np.int64)
