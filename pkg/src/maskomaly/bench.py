"""Timing harness for the score path, comparing kernel backends."""

from __future__ import annotations

import time

from . import kernels
from .heatmap import Toggles, maskomaly
from .model import HyperParams
from .synth import SynthSpec, synth_generate


def make_bench_bundle(height=720, width=1280, n_queries=100, n_classes=19, seed=0):
    """A full-resolution scene sized like real network outputs."""
    n_anomaly = min(3, max(0, n_queries - 1))
    spec = SynthSpec(
        height=height,
        width=width,
        n_classes=n_classes,
        n_inlier_queries=n_queries - n_anomaly,
        n_anomaly_queries=n_anomaly,
        noise_level=0.05,
    )
    masks, probs, _labels, anomalous, _inliers = synth_generate(seed, spec)
    return masks, probs, anomalous


def time_score_path(
    masks,
    probs,
    anomalous=(),
    preset_inliers=(),
    hyper: HyperParams = HyperParams(),
    toggles: Toggles = Toggles(),
    repetitions: int = 100,
    backend: str | None = None,
):
    """Mean/min wall time of one full pipeline run, after one warmup."""
    maskomaly(masks, probs, anomalous, preset_inliers, hyper, toggles, backend=backend)
    samples = []
    for _ in range(repetitions):
        start = time.perf_counter()
        maskomaly(masks, probs, anomalous, preset_inliers, hyper, toggles, backend=backend)
        samples.append(time.perf_counter() - start)
    return {
        "backend": backend or kernels.active_backend(),
        "repetitions": repetitions,
        "mean_s": sum(samples) / len(samples),
        "min_s": min(samples),
        "max_s": max(samples),
    }


def run_benchmark(
    masks,
    probs,
    anomalous=(),
    preset_inliers=(),
    hyper: HyperParams = HyperParams(),
    toggles: Toggles = Toggles(),
    repetitions: int = 100,
    backends=None,
):
    """Time the score path on each requested backend (default: all available)."""
    if backends is None:
        backends = kernels.available_backends()
    return [
        time_score_path(
            masks, probs, anomalous, preset_inliers, hyper, toggles, repetitions, backend=name
        )
        for name in backends
    ]
