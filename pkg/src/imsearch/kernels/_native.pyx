# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scoring kernels: f32 storage, f64 accumulation."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def dot_scores(const float[:, ::1] matrix, const double[::1] vec):
    """Per-row dot products of an (N, d) f32 matrix against a f64 vector."""
    cdef Py_ssize_t n = matrix.shape[0]
    cdef Py_ssize_t d = matrix.shape[1]
    if vec.shape[0] != d:
        raise ValueError(f"shape mismatch: matrix d={d} vs vec {vec.shape[0]}")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(d):
            acc += (<double> matrix[i, j]) * vec[j]
        out_v[i] = acc
    return out


def fused_scores(const float[:, ::1] v_text, const float[:, ::1] v_image,
                 const double[:, ::1] queries, double tau):
    """Dual-path fusion: (1/G) * sum_g [tau * V_T.q_g + (1-tau) * V_I.q_g]."""
    cdef Py_ssize_t n = v_text.shape[0]
    cdef Py_ssize_t d = v_text.shape[1]
    cdef Py_ssize_t g_count = queries.shape[0]
    if v_image.shape[0] != n or v_image.shape[1] != d:
        raise ValueError("matrix shapes differ")
    if queries.shape[1] != d:
        raise ValueError(f"query d={queries.shape[1]} incompatible with matrix d={d}")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef Py_ssize_t i, j, g
    cdef double acc, sim_t, sim_i
    for i in range(n):
        acc = 0.0
        for g in range(g_count):
            sim_t = 0.0
            sim_i = 0.0
            for j in range(d):
                sim_t += (<double> v_text[i, j]) * queries[g, j]
                sim_i += (<double> v_image[i, j]) * queries[g, j]
            acc += tau * sim_t + (1.0 - tau) * sim_i
        out_v[i] = acc / g_count
    return out
