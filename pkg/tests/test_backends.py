"""The compiled extension and the NumPy fallback must agree bit-for-bit."""

import numpy as np
import pytest

from maskomaly import kernels
from maskomaly.heatmap import Toggles, maskomaly
from maskomaly.model import HyperParams

from conftest import random_bundle

needs_compiled = pytest.mark.skipif(
    "compiled" not in kernels.available_backends(),
    reason="compiled extension not built",
)


def test_fallback_always_available():
    assert "fallback" in kernels.available_backends()
    assert kernels.active_backend() in kernels.available_backends()


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.get_backend("gpu")


@needs_compiled
def test_kernels_bit_identical(rng):
    compiled = kernels.get_backend("compiled")
    fallback = kernels.get_backend("fallback")
    for _ in range(20):
        masks, _ = random_bundle(rng, n=int(rng.integers(1, 17)), h=16, w=13, c=2)
        n = masks.n_queries
        k = int(rng.integers(0, n + 1))
        idx = np.sort(rng.choice(n, size=k, replace=False)).astype(np.int64)
        weights = rng.random(k)
        threshold = float(rng.random())
        assert np.array_equal(
            compiled.reject_min(masks.values, idx, weights),
            fallback.reject_min(masks.values, idx, weights),
        )
        assert np.array_equal(
            compiled.accept_max(masks.values, idx, weights),
            fallback.accept_max(masks.values, idx, weights),
        )
        assert np.array_equal(
            compiled.coverage_count(masks.values, idx, threshold),
            fallback.coverage_count(masks.values, idx, threshold),
        )


@needs_compiled
def test_pipeline_bit_identical_across_backends(rng):
    for _ in range(5):
        masks, probs = random_bundle(rng)
        n = masks.n_queries
        anomalous = tuple(rng.choice(n, size=min(n, 3), replace=False).tolist())
        a = maskomaly(masks, probs, anomalous, backend="compiled")
        b = maskomaly(masks, probs, anomalous, backend="fallback")
        assert np.array_equal(a.values, b.values)


@needs_compiled
def test_empty_selection_conventions_match():
    compiled = kernels.get_backend("compiled")
    fallback = kernels.get_backend("fallback")
    masks = np.random.default_rng(0).random((3, 4, 5), dtype=np.float32)
    idx = np.empty(0, dtype=np.int64)
    w = np.empty(0, dtype=np.float64)
    for mod in (compiled, fallback):
        assert np.all(mod.reject_min(masks, idx, w) == 1.0)
        assert np.all(mod.accept_max(masks, idx, w) == 0.0)
        assert np.all(mod.coverage_count(masks, idx, 0.5) == 0)
