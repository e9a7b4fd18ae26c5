"""Deterministic synthetic scenes with known query sets.

Inlier queries tile the image as vertical strips (adjacent strips share a
one-column overlap so the border stage has work to do). Anomaly queries
cover planted equal-area shapes with high membership and high void
probability, so the planted set is recoverable by IoU mining: with
noise 0, each planted query scores an average IoU of exactly 1/n_anomaly
while every inlier query scores 0. A one-pixel IGNORE ring surrounds each
shape, mirroring the void zones of real ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleSpec
from .model import ANOMALY, IGNORE, ClassProbSet, LabelMap, QueryIndexSet, SoftMaskSet

STRIP_MEMBERSHIP = 0.9
OFF_STRIP_MEMBERSHIP = 0.02
INLIER_ON_ANOMALY = 0.05
ANOMALY_MEMBERSHIP = 0.98
ANOMALY_BACKGROUND = 0.01
CONFIDENT_PROB = 0.95


@dataclass(frozen=True)
class SynthSpec:
    height: int
    width: int
    n_classes: int
    n_inlier_queries: int
    n_anomaly_queries: int
    anomaly_shapes: str = "rect"  # rect | disc | mixed
    noise_level: float = 0.0


def _validate(spec: SynthSpec):
    if spec.height < 1 or spec.width < 1:
        raise InfeasibleSpec(f"image size {spec.height}x{spec.width} must be positive")
    if spec.n_classes < 1:
        raise InfeasibleSpec("need at least one inlier class")
    if spec.n_inlier_queries < 1:
        raise InfeasibleSpec("need at least one inlier query to tile the image")
    if spec.n_anomaly_queries < 0:
        raise InfeasibleSpec("anomaly query count cannot be negative")
    if spec.n_inlier_queries + spec.n_anomaly_queries > spec.height * spec.width:
        raise InfeasibleSpec("more queries than pixels")
    if spec.width < spec.n_inlier_queries:
        raise InfeasibleSpec(f"cannot tile width {spec.width} with {spec.n_inlier_queries} strips")
    if spec.anomaly_shapes not in ("rect", "disc", "mixed"):
        raise InfeasibleSpec(f"unknown shape kind {spec.anomaly_shapes!r}")
    if spec.noise_level < 0:
        raise InfeasibleSpec("noise level cannot be negative")


def _dilate(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    out[1:, 1:] |= mask[:-1, :-1]
    out[1:, :-1] |= mask[:-1, 1:]
    out[:-1, 1:] |= mask[1:, :-1]
    out[:-1, :-1] |= mask[1:, 1:]
    return out


def _plant_shapes(spec: SynthSpec, rng: np.random.Generator):
    """One equal-size shape per anomaly query, each jittered inside its own
    horizontal cell so shapes (and their ignore rings) stay disjoint."""
    h, w, n = spec.height, spec.width, spec.n_anomaly_queries
    cell = w // n
    side = min(h - 6, cell - 6, max(1, min(h, w) // 4))
    if side < 1:
        raise InfeasibleSpec(f"no room for {n} shapes of positive area in {h}x{w}")
    if spec.anomaly_shapes in ("disc", "mixed") and side < 3:
        raise InfeasibleSpec("discs need a side of at least 3 pixels")
    shapes = []
    rows = np.arange(h)[:, None]
    cols = np.arange(w)[None, :]
    for k in range(n):
        r0 = int(rng.integers(2, h - side - 1))
        c0 = k * cell + int(rng.integers(2, cell - side - 1))
        kind = spec.anomaly_shapes
        if kind == "mixed":
            kind = "rect" if k % 2 == 0 else "disc"
        if kind == "rect":
            shape = np.zeros((h, w), dtype=bool)
            shape[r0 : r0 + side, c0 : c0 + side] = True
        else:
            r = side / 2.0
            cy, cx = r0 + r, c0 + r
            shape = (rows + 0.5 - cy) ** 2 + (cols + 0.5 - cx) ** 2 <= r * r
        shapes.append(shape)
    return shapes


def synth_generate(seed: int, spec: SynthSpec):
    """Build one scene; deterministic in (seed, spec).

    Returns (masks, probs, labels, planted_anomalous, planted_inliers).
    """
    _validate(spec)
    rng = np.random.default_rng(seed)
    h, w, c = spec.height, spec.width, spec.n_classes
    ni, na = spec.n_inlier_queries, spec.n_anomaly_queries
    n = ni + na

    shapes = _plant_shapes(spec, rng) if na else []
    anomaly_union = np.zeros((h, w), dtype=bool)
    for shape in shapes:
        anomaly_union |= shape

    values = np.zeros((n, h, w), dtype=np.float64)
    bounds = np.linspace(0, w, ni + 1).astype(int)
    for q in range(ni):
        hi = bounds[q + 1] + 1 if q < ni - 1 else bounds[q + 1]  # overlap one column
        strip = np.full((h, w), OFF_STRIP_MEMBERSHIP)
        strip[:, bounds[q] : hi] = STRIP_MEMBERSHIP
        strip[anomaly_union] = INLIER_ON_ANOMALY
        values[q] = strip
    for k, shape in enumerate(shapes):
        values[ni + k] = np.where(shape, ANOMALY_MEMBERSHIP, ANOMALY_BACKGROUND)

    if spec.noise_level > 0:
        values += rng.uniform(-spec.noise_level, spec.noise_level, size=values.shape)
        np.clip(values, 0.0, 1.0, out=values)

    rows = np.full((n, c + 1), (1.0 - CONFIDENT_PROB) / c, dtype=np.float64)
    for q in range(ni):
        rows[q, q % c] = CONFIDENT_PROB
    rows[ni:, c] = CONFIDENT_PROB

    labels = np.zeros((h, w), dtype=np.uint8)
    if shapes:
        ring = _dilate(anomaly_union) & ~anomaly_union
        labels[ring] = IGNORE
        labels[anomaly_union] = ANOMALY

    return (
        SoftMaskSet(values.astype(np.float32)),
        ClassProbSet(rows.astype(np.float32)),
        LabelMap(labels),
        QueryIndexSet(tuple(range(ni, n))),
        QueryIndexSet(tuple(range(ni))),
    )
