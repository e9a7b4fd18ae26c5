import numpy as np
import pytest

from maskomaly.errors import InfeasibleSpec
from maskomaly.mining import query_anomaly_iou, select_anomalous_queries
from maskomaly.model import ANOMALY, IGNORE
from maskomaly.synth import SynthSpec, synth_generate

SPEC = SynthSpec(height=48, width=72, n_classes=4, n_inlier_queries=4, n_anomaly_queries=3)


def test_deterministic_in_seed():
    a = synth_generate(7, SPEC)
    b = synth_generate(7, SPEC)
    assert np.array_equal(a[0].values, b[0].values)
    assert np.array_equal(a[1].values, b[1].values)
    assert np.array_equal(a[2].values, b[2].values)
    c = synth_generate(8, SPEC)
    assert not np.array_equal(a[0].values, c[0].values)


def test_planted_sets_and_labels():
    masks, probs, labels, anomalous, inliers = synth_generate(0, SPEC)
    assert list(inliers) == [0, 1, 2, 3]
    assert list(anomalous) == [4, 5, 6]
    assert masks.n_queries == 7
    assert probs.n_classes == 4
    assert (labels.values == ANOMALY).any()
    assert (labels.values == IGNORE).any()  # ring around each shape


def test_no_anomaly_queries_means_clean_labels():
    spec = SynthSpec(height=20, width=30, n_classes=2, n_inlier_queries=3, n_anomaly_queries=0)
    _, _, labels, anomalous, _ = synth_generate(0, spec)
    assert len(anomalous) == 0
    assert not labels.values.any()


def test_mining_recovers_planted_queries_exactly():
    spec = SPEC
    bundles, truths = [], []
    planted = None
    for i in range(10):
        masks, probs, labels, planted, _ = synth_generate(100 + i, spec)
        bundles.append((masks, probs))
        truths.append(labels)
    report = query_anomaly_iou(bundles, truths)
    mined = select_anomalous_queries(report, 0.25)
    assert set(mined) == set(planted)
    # planted queries each cover one of three equal-area shapes
    for q in planted:
        assert report.avg_iou[q] == pytest.approx(1.0 / 3.0, abs=1e-9)


def test_noise_perturbs_but_keeps_valid():
    spec = SynthSpec(height=32, width=48, n_classes=3, n_inlier_queries=3,
                     n_anomaly_queries=2, noise_level=0.2)
    masks, probs, labels, _, _ = synth_generate(3, spec)
    clean = synth_generate(3, SynthSpec(height=32, width=48, n_classes=3,
                                        n_inlier_queries=3, n_anomaly_queries=2))
    assert not np.array_equal(masks.values, clean[0].values)
    assert masks.values.min() >= 0.0 and masks.values.max() <= 1.0


def test_disc_and_mixed_shapes():
    for kind in ("disc", "mixed"):
        spec = SynthSpec(height=40, width=60, n_classes=3, n_inlier_queries=3,
                         n_anomaly_queries=2, anomaly_shapes=kind)
        _, _, labels, anomalous, _ = synth_generate(1, spec)
        assert (labels.values == ANOMALY).any()
        assert len(anomalous) == 2


def test_infeasible_specs():
    with pytest.raises(InfeasibleSpec):
        synth_generate(0, SynthSpec(height=0, width=10, n_classes=2, n_inlier_queries=1, n_anomaly_queries=0))
    with pytest.raises(InfeasibleSpec):
        synth_generate(0, SynthSpec(height=4, width=4, n_classes=2, n_inlier_queries=20, n_anomaly_queries=0))
    with pytest.raises(InfeasibleSpec):
        synth_generate(0, SynthSpec(height=8, width=8, n_classes=2, n_inlier_queries=1, n_anomaly_queries=4))
    with pytest.raises(InfeasibleSpec):
        synth_generate(0, SynthSpec(height=100, width=100, n_classes=2, n_inlier_queries=1,
                                    n_anomaly_queries=1, anomaly_shapes="blob"))
    with pytest.raises(InfeasibleSpec):
        synth_generate(0, SynthSpec(height=100, width=100, n_classes=0, n_inlier_queries=1, n_anomaly_queries=0))


def test_strips_share_border_columns():
    # adjacent inlier strips overlap one column, so the border stage has work
    masks, _, _, _, inliers = synth_generate(0, SPEC)
    hot = (masks.values[list(inliers)] > 0.1).sum(axis=0)
    assert (hot >= 2).any()
