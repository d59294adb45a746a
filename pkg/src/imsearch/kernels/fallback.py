"""Numpy implementations of the scoring kernels.

Matrices are stored float32; all dot products accumulate in float64 so
results agree with a scalar-loop recomputation to ~1e-15.
"""

from __future__ import annotations

import numpy as np


def dot_scores(matrix: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Per-row dot products of an (N, d) matrix against a length-d vector."""
    if matrix.ndim != 2 or vec.ndim != 1 or matrix.shape[1] != vec.shape[0]:
        raise ValueError(f"shape mismatch: matrix {matrix.shape} vs vec {vec.shape}")
    return matrix.astype(np.float64, copy=False) @ vec.astype(np.float64, copy=False)


def fused_scores(
    v_text: np.ndarray, v_image: np.ndarray, queries: np.ndarray, tau: float
) -> np.ndarray:
    """Dual-path similarity fusion.

    ``queries`` is (G, d), one row per description granularity. Returns
    the length-N vector  (1/G) * sum_g [tau * V_T @ q_g + (1-tau) * V_I @ q_g].

    Accumulates per granularity in ascending order (matching the compiled
    kernel) so the tau=0 / tau=1 boundaries reduce bit-exactly to the
    single-path dot products.
    """
    if v_text.shape != v_image.shape:
        raise ValueError(f"matrix shapes differ: {v_text.shape} vs {v_image.shape}")
    if queries.ndim != 2 or queries.shape[1] != v_text.shape[1]:
        raise ValueError(f"query shape {queries.shape} incompatible with d={v_text.shape[1]}")
    total = np.zeros(v_text.shape[0], dtype=np.float64)
    for g in range(queries.shape[0]):
        q = queries[g]
        total += tau * dot_scores(v_text, q) + (1.0 - tau) * dot_scores(v_image, q)
    return total / queries.shape[0]
