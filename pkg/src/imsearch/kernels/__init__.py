"""Scoring kernels with backend selection at import time.

The compiled extension (``imsearch.kernels._native``) is preferred when it
built successfully; otherwise the numpy implementations take over. Set
IMSEARCH_KERNEL=python or =native to force a backend (forcing ``native``
when the extension is missing raises at import).
"""

from __future__ import annotations

import os

import numpy as np

from . import fallback

_requested = os.environ.get("IMSEARCH_KERNEL", "auto").lower()
_backend = "python"
dot_scores = fallback.dot_scores
fused_scores = fallback.fused_scores

if _requested not in ("auto", "native", "python"):
    raise ImportError(f"IMSEARCH_KERNEL must be auto|native|python, got {_requested!r}")

if _requested in ("auto", "native"):
    try:
        from . import _native  # type: ignore[attr-defined]

        dot_scores = _native.dot_scores
        fused_scores = _native.fused_scores
        _backend = "native"
    except ImportError:
        if _requested == "native":
            raise


def kernel_backend() -> str:
    """Which implementation is live: 'native' or 'python'."""
    return _backend


def argsort_desc(scores: np.ndarray) -> np.ndarray:
    """Stable descending argsort: equal scores keep input order.

    Returns 0-based positions. Rejects non-finite scores.
    """
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d score vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("scores must be finite")
    return np.argsort(-arr, kind="stable")


__all__ = ["dot_scores", "fused_scores", "argsort_desc", "kernel_backend"]
