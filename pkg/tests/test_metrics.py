import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskomaly.errors import (
    DegenerateLabels,
    DimensionMismatch,
    GridMismatch,
    NoPositives,
    RangeViolation,
)
from maskomaly.metrics import (
    ScoredPixels,
    ThresholdStats,
    auroc,
    average_precision,
    f1_at_threshold,
    fpr_at_tpr,
    mdm,
    mdm_from_scored,
    merge_stats,
    pr_curve,
    roc_curve,
)
from maskomaly.model import AnomalyMap, LabelMap

import reference
from conftest import random_scored_arrays


def scored(scores, labels):
    return ScoredPixels(np.asarray(scores, dtype=np.float64), np.asarray(labels, dtype=np.uint8))


# --- construction -----------------------------------------------------------

def test_scored_pixels_validation():
    with pytest.raises(DimensionMismatch):
        scored([0.5, 0.5], [1])
    with pytest.raises(RangeViolation):
        scored([1.5], [1])
    with pytest.raises(RangeViolation):
        ScoredPixels(np.array([0.5]), np.array([2], dtype=np.uint8))


def test_from_maps_drops_ignore():
    pred = AnomalyMap(np.array([[0.9, 0.1], [0.4, 0.6]], dtype=np.float32))
    truth = LabelMap(np.array([[1, 0], [255, 1]], dtype=np.uint8))
    data = ScoredPixels.from_maps(pred, truth)
    assert len(data.scores) == 3
    assert data.n_positive == 2


# --- average precision ------------------------------------------------------

def test_ap_perfect_ranking():
    assert average_precision(scored([1, 0, 1, 0], [1, 0, 1, 0])) == 1.0


def test_ap_interleaved_example():
    data = scored([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
    assert average_precision(data) == pytest.approx(5.0 / 6.0, abs=1e-12)


def test_ap_all_positive():
    data = scored([0.3, 0.9, 0.1], [1, 1, 1])
    assert average_precision(data) == 1.0


def test_ap_needs_positives():
    with pytest.raises(NoPositives):
        average_precision(scored([0.4, 0.2], [0, 0]))


def test_ap_ties_grouped():
    # one tie group holding both a positive and a negative
    data = scored([0.5, 0.5], [1, 0])
    assert average_precision(data) == pytest.approx(0.5)


# --- auroc ------------------------------------------------------------------

def test_auroc_perfect_and_constant():
    assert auroc(scored([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])) == 1.0
    assert auroc(scored([0.5, 0.5, 0.5, 0.5], [1, 1, 0, 0])) == 0.5


def test_auroc_pair_example():
    data = scored([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
    assert auroc(data) == pytest.approx(0.75, abs=1e-12)


def test_auroc_degenerate():
    with pytest.raises(DegenerateLabels):
        auroc(scored([0.5, 0.6], [1, 1]))


# --- fpr at tpr -------------------------------------------------------------

def test_fpr_perfect_separation():
    assert fpr_at_tpr(scored([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])) == 0.0


def test_fpr_identical_scores():
    assert fpr_at_tpr(scored([0.5] * 10, [1] * 5 + [0] * 5)) == 1.0


def test_fpr_first_crossing():
    scores = np.concatenate([np.full(100, 0.9), np.full(100, 0.1), np.full(5, 0.05)])
    labels = np.concatenate([np.ones(100), np.zeros(100), np.ones(5)]).astype(np.uint8)
    # at threshold 0.9: TPR = 100/105 > 0.95 already, with zero false positives
    assert fpr_at_tpr(scored(scores, labels), 0.95) == 0.0


# --- f1 and mdm -------------------------------------------------------------

def amap(arr):
    return AnomalyMap(np.asarray(arr, dtype=np.float32))


def lmap(arr):
    return LabelMap(np.asarray(arr, dtype=np.uint8))


def test_f1_binary_exact_match():
    pred = amap([[1.0, 0.0], [0.0, 1.0]])
    truth = lmap([[1, 0], [0, 1]])
    for t in (0.1, 0.5, 0.9):
        assert f1_at_threshold(pred, truth, t) == 1.0


def test_f1_empty_prediction():
    assert f1_at_threshold(amap([[0.0, 0.0]]), lmap([[1, 0]]), 0.5) == 0.0


def test_f1_arithmetic():
    # TP=2, FP=1, FN=1 -> F1 = 2/3
    pred = amap([[1.0, 1.0, 1.0, 0.0]])
    truth = lmap([[1, 1, 0, 1]])
    assert f1_at_threshold(pred, truth, 0.5) == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_mdm_perfect_binary_predictor():
    pred = amap([[1.0, 0.0], [0.0, 1.0]])
    truth = lmap([[1, 0], [0, 1]])
    assert mdm(pred, truth, margin=0.9, grid=256) == 255.0 / 256.0


def test_mdm_constant_zero_predictor():
    assert mdm(amap([[0.0, 0.0]]), lmap([[1, 0]]), margin=0.5, grid=256) == 0.0


def test_mdm_strict_margin_one():
    pred = amap([[1.0, 0.0]])
    truth = lmap([[1, 0]])
    assert mdm(pred, truth, margin=1.0, grid=256) == 0.0


def test_mdm_matches_brute_force(rng):
    for _ in range(20):
        scores, labels = random_scored_arrays(rng, size=200)
        margin = float(rng.random())
        got = mdm_from_scored(scored(scores, labels), margin, grid=64)
        want = reference.brute_mdm(scores, labels, margin, 64)
        assert got == want


def test_mdm_monotone_in_margin(rng):
    scores, labels = random_scored_arrays(rng, size=500)
    data = scored(scores, labels)
    values = [mdm_from_scored(data, m, 128) for m in np.linspace(0.1, 0.9, 9)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_mdm_permutation_invariant(rng):
    scores, labels = random_scored_arrays(rng, size=300)
    perm = rng.permutation(len(scores))
    a = mdm_from_scored(scored(scores, labels), 0.6, 256)
    b = mdm_from_scored(scored(scores[perm], labels[perm]), 0.6, 256)
    assert a == b


def test_ignore_pixels_never_affect_metrics(rng):
    pred = rng.random((20, 20), dtype=np.float32)
    truth = (rng.random((20, 20)) < 0.3).astype(np.uint8)
    truth[5:9, 5:9] = 255
    base = ScoredPixels.from_maps(amap(pred), lmap(truth))
    altered = pred.copy()
    altered[truth == 255] = 1.0 - altered[truth == 255]
    changed = ScoredPixels.from_maps(amap(altered), lmap(truth))
    assert average_precision(base) == average_precision(changed)
    assert auroc(base) == auroc(changed)
    assert fpr_at_tpr(base) == fpr_at_tpr(changed)
    assert mdm_from_scored(base, 0.6, 64) == mdm_from_scored(changed, 0.6, 64)
    assert f1_at_threshold(amap(pred), lmap(truth), 0.5) == f1_at_threshold(amap(altered), lmap(truth), 0.5)


# --- rank invariance --------------------------------------------------------

def test_exact_metrics_invariant_under_monotone_transform(rng):
    scores, labels = random_scored_arrays(rng, size=800)
    data = scored(scores, labels)
    warped = scored(np.sqrt(scores) * 0.5 + 0.25, labels)  # strictly increasing into [0,1]
    assert average_precision(data) == pytest.approx(average_precision(warped), abs=1e-12)
    assert auroc(data) == pytest.approx(auroc(warped), abs=1e-12)
    assert fpr_at_tpr(data) == pytest.approx(fpr_at_tpr(warped), abs=1e-12)


# --- oracle agreement -------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_exact_mode_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    scores, labels = random_scored_arrays(rng, size=int(rng.integers(10, 400)))
    data = scored(scores, labels)
    assert average_precision(data) == pytest.approx(
        reference.brute_average_precision(scores, labels), abs=1e-9
    )
    assert auroc(data) == pytest.approx(reference.brute_auroc(scores, labels), abs=1e-9)
    assert fpr_at_tpr(data) == pytest.approx(
        reference.brute_fpr_at_tpr(scores, labels, 0.95), abs=1e-9
    )


def test_exact_matches_sklearn(rng):
    sklearn = pytest.importorskip("sklearn.metrics")
    for _ in range(10):
        scores, labels = random_scored_arrays(rng, size=500)
        data = scored(scores, labels)
        assert average_precision(data) == pytest.approx(
            sklearn.average_precision_score(labels, scores), abs=1e-9
        )
        assert auroc(data) == pytest.approx(sklearn.roc_auc_score(labels, scores), abs=1e-9)


# --- binned mode ------------------------------------------------------------

def test_binned_close_to_exact(rng):
    for _ in range(5):
        scores, labels = random_scored_arrays(rng, size=50_000)
        data = scored(scores, labels)
        assert average_precision(data, "binned", 4096) == pytest.approx(
            average_precision(data), abs=1e-3
        )
        assert auroc(data, "binned", 4096) == pytest.approx(auroc(data), abs=1e-3)
        assert fpr_at_tpr(data, 0.95, "binned", 4096) == pytest.approx(
            fpr_at_tpr(data), abs=1e-3
        )


def test_stats_merge_matches_concatenation(rng):
    s1, l1 = random_scored_arrays(rng, size=700)
    s2, l2 = random_scored_arrays(rng, size=400)
    a = ThresholdStats.from_scored(scored(s1, l1), 256)
    b = ThresholdStats.from_scored(scored(s2, l2), 256)
    both = ThresholdStats.from_scored(scored(np.r_[s1, s2], np.r_[l1, l2]), 256)
    merged = merge_stats(a, b)
    assert np.array_equal(merged.pos, both.pos)
    assert np.array_equal(merged.neg, both.neg)


def test_stats_merge_identity_commutative_associative(rng):
    parts = [
        ThresholdStats.from_scored(scored(*random_scored_arrays(rng, size=300)), 128)
        for _ in range(3)
    ]
    a, b, c = parts
    empty = ThresholdStats.empty(128)
    assert np.array_equal(merge_stats(a, empty).pos, a.pos)
    ab = merge_stats(a, b)
    ba = merge_stats(b, a)
    assert np.array_equal(ab.pos, ba.pos) and np.array_equal(ab.neg, ba.neg)
    left = merge_stats(merge_stats(a, b), c)
    right = merge_stats(a, merge_stats(b, c))
    assert np.array_equal(left.pos, right.pos) and np.array_equal(left.neg, right.neg)


def test_stats_grid_mismatch():
    with pytest.raises(GridMismatch):
        merge_stats(ThresholdStats.empty(64), ThresholdStats.empty(128))


def test_stats_cumulative_monotone(rng):
    scores, labels = random_scored_arrays(rng, size=1000)
    stats = ThresholdStats.from_scored(scored(scores, labels), 64)
    cum_tp = np.cumsum(stats.pos[::-1])
    cum_fp = np.cumsum(stats.neg[::-1])
    assert np.all(np.diff(cum_tp) >= 0) and np.all(np.diff(cum_fp) >= 0)


# --- curves -----------------------------------------------------------------

def test_curves_shapes_and_endpoints(rng):
    scores, labels = random_scored_arrays(rng, size=500)
    data = scored(scores, labels)
    t, precision, recall = pr_curve(data)
    assert recall[-1] == 1.0
    assert len(t) == len(precision) == len(recall)
    t, fpr, tpr = roc_curve(data)
    assert fpr[-1] == 1.0 and tpr[-1] == 1.0
