"""Anomaly-heatmap pipeline: inlier selection, rejection, border rejection,
acceptance, interpolation, and the per-pixel dominant-mask baseline.

Every operation is a pure function over the immutable model types. Scores
are accumulated in float64 and returned as float32 maps in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch, InvalidToggles, RangeViolation
from .model import (
    AnomalyMap,
    ClassProbSet,
    HyperParams,
    QueryIndexSet,
    SoftMaskSet,
    as_query_indices,
)


@dataclass(frozen=True)
class Toggles:
    """Stage switches of the pipeline; each maps to one ablation row."""

    accept: bool = True
    reject: bool = True
    borders: bool = True
    init: bool = True


# Ablation rows 2..6: stage combinations evaluated by the `ablate` command.
# Row 1 is the dominant-mask baseline (see baseline_map).
ABLATION_TOGGLES = {
    2: Toggles(accept=True, reject=False, borders=False, init=False),
    3: Toggles(accept=False, reject=True, borders=False, init=False),
    4: Toggles(accept=False, reject=True, borders=True, init=False),
    5: Toggles(accept=True, reject=True, borders=True, init=False),
    6: Toggles(accept=True, reject=True, borders=True, init=True),
}


def _index_array(indices: QueryIndexSet, n_queries: int) -> np.ndarray:
    idx = as_query_indices(indices).check_bound(n_queries)
    return np.asarray(idx.indices, dtype=np.int64)


def select_inlier_queries(probs: ClassProbSet, t_mask: float, preset=()) -> QueryIndexSet:
    """Queries whose best class is an inlier class with confidence >= t_mask.

    Preset indices (hand-picked, e.g. mined ambiguous-ground queries) are
    included unconditionally. Result is sorted ascending.
    """
    preset = as_query_indices(preset).check_bound(probs.n_queries)
    rows = probs.values
    best = rows.argmax(axis=1)
    conf = rows.max(axis=1).astype(np.float64)
    keep = (best != probs.void_index) & (conf >= np.float64(t_mask))
    selected = set(np.flatnonzero(keep).tolist()) | set(preset.indices)
    return QueryIndexSet(tuple(sorted(selected)))


def _inlier_weights(probs: ClassProbSet, idx: np.ndarray) -> np.ndarray:
    # max over inlier classes only; with C = 0 there is nothing to trust
    inlier_cols = probs.values[:, : probs.n_classes]
    if inlier_cols.shape[1] == 0:
        return np.zeros(len(idx), dtype=np.float64)
    return inlier_cols.max(axis=1)[idx].astype(np.float64)


def reject_map(masks: SoftMaskSet, probs: ClassProbSet, inliers, backend: str | None = None) -> AnomalyMap:
    """Per pixel, min over inlier queries of (1 - membership * class confidence).

    An empty inlier set leaves every pixel maximally anomalous (all ones).
    """
    idx = _index_array(inliers, masks.n_queries)
    weights = _inlier_weights(probs, idx)
    out = kernels.get_backend(backend).reject_min(masks.values, idx, weights)
    return AnomalyMap(out)


def reject_borders(
    reject: AnomalyMap,
    masks: SoftMaskSet,
    inliers,
    t_border: float,
    eps_border: float,
    backend: str | None = None,
) -> AnomalyMap:
    """Cap the score at eps_border wherever two inlier masks overlap.

    A pixel lies on a border iff at least two inlier memberships exceed
    t_border, which is exactly the union of all pairwise intersections.
    Pixels outside every intersection are returned bit-identical.
    """
    if (reject.height, reject.width) != (masks.height, masks.width):
        raise DimensionMismatch(
            f"reject map {reject.values.shape} does not match masks {masks.values.shape[1:]}"
        )
    idx = _index_array(inliers, masks.n_queries)
    if len(idx) < 2:
        return reject
    counts = kernels.get_backend(backend).coverage_count(masks.values, idx, float(t_border))
    border = counts >= 2
    out = reject.values.copy()
    out[border] = np.minimum(out[border].astype(np.float64), np.float64(eps_border)).astype(np.float32)
    return AnomalyMap(out)


def accept_map(masks: SoftMaskSet, probs: ClassProbSet, anomalous, backend: str | None = None) -> AnomalyMap:
    """Per pixel, max over anomalous queries of (membership * void probability).

    An empty anomalous set yields all zeros.
    """
    idx = _index_array(anomalous, masks.n_queries)
    void_probs = probs.values[:, probs.void_index][idx].astype(np.float64)
    out = kernels.get_backend(backend).accept_max(masks.values, idx, void_probs)
    return AnomalyMap(out)


def combine(reject: AnomalyMap, accept: AnomalyMap, lam: float) -> AnomalyMap:
    """Pointwise lam * reject + (1 - lam) * accept.

    lam = 1 returns the reject scores bit-exactly; lam = 0 the accept scores.
    """
    if reject.values.shape != accept.values.shape:
        raise DimensionMismatch(
            f"reject {reject.values.shape} and accept {accept.values.shape} shapes differ"
        )
    if not 0.0 <= lam <= 1.0:
        raise RangeViolation(f"interpolation weight {lam} must lie in [0, 1]")
    lam = np.float64(lam)
    out = lam * reject.values + (np.float64(1.0) - lam) * accept.values
    return AnomalyMap(out.astype(np.float32))


def maskomaly(
    masks: SoftMaskSet,
    probs: ClassProbSet,
    anomalous=(),
    preset_inliers=(),
    hyper: HyperParams = HyperParams(),
    toggles: Toggles = Toggles(),
    backend: str | None = None,
) -> AnomalyMap:
    """Full scoring pipeline with per-stage switches.

    Disabling reject forces the interpolation weight to 0 (accept-only
    output); disabling accept forces it to 1; disabling init drops the
    preset inlier indices; disabling borders skips the border stage.
    """
    if not toggles.accept and not toggles.reject:
        raise InvalidToggles("at least one of the accept and reject stages must be enabled")
    shape = (masks.height, masks.width)
    lam = hyper.lam
    if not toggles.accept:
        lam = 1.0
    if not toggles.reject:
        lam = 0.0

    if toggles.reject:
        preset = preset_inliers if toggles.init else ()
        inliers = select_inlier_queries(probs, hyper.t_mask, preset)
        rej = reject_map(masks, probs, inliers, backend=backend)
        if toggles.borders:
            rej = reject_borders(rej, masks, inliers, hyper.t_border, hyper.eps_border, backend=backend)
    else:
        rej = AnomalyMap(np.ones(shape, dtype=np.float32))

    if toggles.accept:
        acc = accept_map(masks, probs, anomalous, backend=backend)
    else:
        acc = AnomalyMap(np.zeros(shape, dtype=np.float32))

    return combine(rej, acc, lam)


def baseline_map(masks: SoftMaskSet, probs: ClassProbSet) -> AnomalyMap:
    """Dominant-mask baseline.

    Each pixel takes its dominant query's membership when that query is
    void-classified, and one minus the membership otherwise.
    """
    dom = np.argmax(masks.values, axis=0)
    top = masks.values.max(axis=0).astype(np.float64)
    void_query = probs.values.argmax(axis=1) == probs.void_index
    out = np.where(void_query[dom], top, 1.0 - top)
    return AnomalyMap(out.astype(np.float32))
