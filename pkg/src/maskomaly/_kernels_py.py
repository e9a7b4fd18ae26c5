"""NumPy implementations of the per-query accumulation kernels.

These are the import-time fallback for the compiled extension. Both
backends accumulate in float64 with identical per-element arithmetic and
iterate queries in index order, so their outputs are bit-identical.
"""

import numpy as np


def reject_min(masks: np.ndarray, idx: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """min over selected queries of (1 - m * w); empty selection gives all ones."""
    out = np.ones(masks.shape[1:], dtype=np.float64)
    for k in range(len(idx)):
        t = np.multiply(masks[idx[k]], np.float64(weights[k]), dtype=np.float64)
        np.subtract(1.0, t, out=t)
        np.minimum(out, t, out=out)
    return out.astype(np.float32)


def accept_max(masks: np.ndarray, idx: np.ndarray, void_probs: np.ndarray) -> np.ndarray:
    """max over selected queries of (m * p_void); empty selection gives all zeros."""
    out = np.zeros(masks.shape[1:], dtype=np.float64)
    for k in range(len(idx)):
        t = np.multiply(masks[idx[k]], np.float64(void_probs[k]), dtype=np.float64)
        np.maximum(out, t, out=out)
    return out.astype(np.float32)


def coverage_count(masks: np.ndarray, idx: np.ndarray, threshold: float) -> np.ndarray:
    """Per pixel, how many of the selected masks exceed the threshold (strict)."""
    t = np.float64(threshold)
    out = np.zeros(masks.shape[1:], dtype=np.int32)
    for q in idx:
        out += masks[q] > t
    return out
