# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-query accumulation kernels (the hot loops of the pipeline).

Mirrors _kernels_py exactly: float64 accumulation, queries visited in
index order, float32 results. Loops run without the GIL so image-level
thread pools can overlap work.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fmax, fmin

cnp.import_array()


def reject_min(const float[:, :, ::1] masks, const long long[::1] idx, const double[::1] weights):
    cdef Py_ssize_t h = masks.shape[1]
    cdef Py_ssize_t w = masks.shape[2]
    out_arr = np.ones((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t k, i, j, q
    cdef double wq
    with nogil:
        for k in range(idx.shape[0]):
            q = idx[k]
            wq = weights[k]
            for i in range(h):
                for j in range(w):
                    # fmin matches np.minimum for the NaN-free inputs here
                    out[i, j] = fmin(out[i, j], 1.0 - (<double> masks[q, i, j]) * wq)
    return out_arr.astype(np.float32)


def accept_max(const float[:, :, ::1] masks, const long long[::1] idx, const double[::1] void_probs):
    cdef Py_ssize_t h = masks.shape[1]
    cdef Py_ssize_t w = masks.shape[2]
    out_arr = np.zeros((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t k, i, j, q
    cdef double pq
    with nogil:
        for k in range(idx.shape[0]):
            q = idx[k]
            pq = void_probs[k]
            for i in range(h):
                for j in range(w):
                    out[i, j] = fmax(out[i, j], (<double> masks[q, i, j]) * pq)
    return out_arr.astype(np.float32)


def coverage_count(const float[:, :, ::1] masks, const long long[::1] idx, double threshold):
    cdef Py_ssize_t h = masks.shape[1]
    cdef Py_ssize_t w = masks.shape[2]
    out_arr = np.zeros((h, w), dtype=np.int32)
    cdef int[:, ::1] out = out_arr
    cdef Py_ssize_t k, i, j, q
    with nogil:
        for k in range(idx.shape[0]):
            q = idx[k]
            for i in range(h):
                for j in range(w):
                    if (<double> masks[q, i, j]) > threshold:
                        out[i, j] += 1
    return out_arr
