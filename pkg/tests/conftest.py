import numpy as np
import pytest

from maskomaly.model import ClassProbSet, SoftMaskSet


def random_bundle(rng, n=None, h=None, w=None, c=None):
    """A random valid (masks, probs) pair."""
    n = n or int(rng.integers(1, 33))
    h = h or int(rng.integers(1, 65))
    w = w or int(rng.integers(1, 65))
    c = c if c is not None else int(rng.integers(1, 9))
    masks = rng.random((n, h, w), dtype=np.float32)
    probs = rng.dirichlet(np.ones(c + 1), size=n).astype(np.float32)
    return SoftMaskSet(masks), ClassProbSet(probs)


def random_scored_arrays(rng, size=None, p_pos=0.3):
    """Random (scores, labels) with a mild positive/negative separation."""
    size = size or int(rng.integers(10, 2000))
    labels = (rng.random(size) < p_pos).astype(np.uint8)
    if not labels.any():
        labels[int(rng.integers(0, size))] = 1
    if labels.all():
        labels[int(rng.integers(0, size))] = 0
    scores = np.where(
        labels == 1,
        rng.beta(4.0, 2.0, size=size),
        rng.beta(2.0, 4.0, size=size),
    )
    # quantize some runs to force score ties
    if rng.random() < 0.5:
        q = int(rng.integers(2, 40))
        scores = np.round(scores * q) / q
    return scores.astype(np.float64), labels


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
