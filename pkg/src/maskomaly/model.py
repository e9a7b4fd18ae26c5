"""Shared data model: network outputs, ground truth, query sets, hyperparameters.

All container types validate their invariants on construction and are
immutable afterwards, so instances can be shared freely across threads.
Arrays are stored as float32 (uint8 for labels); computations elsewhere
accumulate in float64 and round back to float32 on output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, RangeViolation, RowSumViolation

INLIER = 0
ANOMALY = 1
IGNORE = 255

ROW_SUM_TOL = 1e-4


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SoftMaskSet:
    """N soft mask membership maps of shape H x W with values in [0, 1]."""

    values: np.ndarray  # (N, H, W) float32

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 3:
            raise DimensionMismatch(f"mask set must be (N, H, W), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise DimensionMismatch(f"mask set needs N, H, W >= 1, got shape {arr.shape}")
        arr = _frozen_array(arr, np.float32)
        if not (np.all(arr >= 0.0) and np.all(arr <= 1.0)):
            raise RangeViolation("mask membership values must lie in [0, 1]")
        object.__setattr__(self, "values", arr)

    @property
    def n_queries(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class ClassProbSet:
    """N probability rows over C inlier classes plus a trailing void entry.

    Classes 0..C-1 are inliers; index C is void. Rows must sum to 1 within
    ROW_SUM_TOL. C = 0 is allowed (used by heatmap containers).
    """

    values: np.ndarray  # (N, C + 1) float32

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch(f"class probabilities must be (N, C + 1), got shape {arr.shape}")
        arr = _frozen_array(arr, np.float32)
        if not (np.all(arr >= 0.0) and np.all(arr <= 1.0)):
            raise RangeViolation("class probabilities must lie in [0, 1]")
        sums = arr.sum(axis=1, dtype=np.float64)
        bad = np.abs(sums - 1.0) > ROW_SUM_TOL
        if np.any(bad):
            n = int(np.flatnonzero(bad)[0])
            raise RowSumViolation(f"probability row {n} sums to {sums[n]:.6f}, expected 1 +/- {ROW_SUM_TOL}")
        object.__setattr__(self, "values", arr)

    @property
    def n_queries(self) -> int:
        return self.values.shape[0]

    @property
    def n_classes(self) -> int:
        """Number of inlier classes C (void excluded)."""
        return self.values.shape[1] - 1

    @property
    def void_index(self) -> int:
        return self.values.shape[1] - 1


@dataclass(frozen=True)
class AnomalyMap:
    """Dense H x W map of anomaly scores in [0, 1]."""

    values: np.ndarray  # (H, W) float32

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 2 or min(arr.shape) < 1:
            raise DimensionMismatch(f"anomaly map must be (H, W), got shape {arr.shape}")
        arr = _frozen_array(arr, np.float32)
        if not (np.all(arr >= 0.0) and np.all(arr <= 1.0)):
            raise RangeViolation("anomaly scores must lie in [0, 1]")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabelMap:
    """H x W ground truth with values INLIER=0, ANOMALY=1, IGNORE=255."""

    values: np.ndarray  # (H, W) uint8

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 2 or min(arr.shape) < 1:
            raise DimensionMismatch(f"label map must be (H, W), got shape {arr.shape}")
        arr = _frozen_array(arr, np.uint8)
        bad = (arr != INLIER) & (arr != ANOMALY) & (arr != IGNORE)
        if np.any(bad):
            v = int(arr[bad][0])
            raise RangeViolation(f"label map contains value {v}, allowed values are 0, 1, 255")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class QueryIndexSet:
    """Ordered, duplicate-free set of query indices.

    Order is meaningful: mined anomalous queries are kept sorted by
    descending IoU so prefixes of the sequence feed the mask-count sweep.
    """

    indices: tuple = ()

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(i < 0 for i in idx):
            raise RangeViolation(f"query indices must be non-negative, got {idx}")
        if len(set(idx)) != len(idx):
            raise DimensionMismatch(f"duplicate query indices in {idx}")
        object.__setattr__(self, "indices", idx)

    def __iter__(self):
        return iter(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, i) -> bool:
        return int(i) in self.indices

    def check_bound(self, n_queries: int) -> "QueryIndexSet":
        if self.indices and max(self.indices) >= n_queries:
            raise DimensionMismatch(
                f"query index {max(self.indices)} out of range for N={n_queries}"
            )
        return self


def as_query_indices(indices) -> QueryIndexSet:
    """Coerce an iterable of ints (or a QueryIndexSet) into a QueryIndexSet."""
    if isinstance(indices, QueryIndexSet):
        return indices
    return QueryIndexSet(tuple(indices))


@dataclass(frozen=True)
class HyperParams:
    """Thresholds and weights of the scoring pipeline and its evaluation."""

    lam: float = 0.6            # interpolation weight between reject and accept
    t_mask: float = 0.3         # min class confidence for inlier-query selection
    t_border: float = 0.1       # membership threshold for border detection
    eps_border: float = 0.001   # score assigned to shared inlier-mask borders
    t_iou: float = 0.25         # min average IoU for mined anomalous queries
    t_query: float = 0.9        # frequency threshold for specialized queries
    eps_query: float = 0.1      # probability slack for specialized queries
    mdm_grid: int = 256         # K thresholds for the detection-margin metric
    mdm_margin: float = 0.6     # default margin; 0.6 and 0.7 ship as presets

    def __post_init__(self):
        for name in ("lam", "t_mask", "t_border", "eps_border", "t_iou", "t_query", "eps_query", "mdm_margin"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise RangeViolation(f"{name}={v} must lie in [0, 1]")
        if self.mdm_grid < 2:
            raise RangeViolation(f"mdm_grid={self.mdm_grid} must be >= 2")


def validate_bundle(masks: SoftMaskSet, probs: ClassProbSet):
    """Validate a (masks, probs) pair and return it.

    Raw arrays are accepted and coerced; the type constructors enforce the
    per-type invariants, this function enforces the cross-type one.
    """
    if not isinstance(masks, SoftMaskSet):
        masks = SoftMaskSet(masks)
    if not isinstance(probs, ClassProbSet):
        probs = ClassProbSet(probs)
    if masks.n_queries != probs.n_queries:
        raise DimensionMismatch(
            f"mask set has N={masks.n_queries} but probability set has N={probs.n_queries}"
        )
    return masks, probs


def dominant_query(masks: SoftMaskSet) -> np.ndarray:
    """Per-pixel index of the query with the highest membership.

    Ties break toward the lowest query index, so the result is invariant
    to any strictly monotone per-pixel rescaling applied to all queries.
    """
    return np.argmax(masks.values, axis=0).astype(np.int32)
