"""Fit scores and Monte Carlo aggregation."""

from __future__ import annotations

import numpy as np


def fit(a, a_ref) -> float:
    """``1 - ||a - a_ref|| / ||a_ref - mean(a_ref)||``; 1 is a perfect match.

    Not symmetric: ``a`` is the estimate, ``a_ref`` the reference.
    """
    a = np.asarray(a, dtype=float).ravel()
    a_ref = np.asarray(a_ref, dtype=float).ravel()
    if a.shape != a_ref.shape:
        raise ValueError(f"length mismatch: {a.size} vs {a_ref.size}")
    denom = np.linalg.norm(a_ref - a_ref.mean())
    if denom == 0:
        raise ValueError("reference is constant; fit is undefined")
    return float(1.0 - np.linalg.norm(a - a_ref) / denom)


def median(xs) -> float:
    xs = np.asarray(list(xs), dtype=float)
    if xs.size == 0:
        raise ValueError("median of an empty sequence")
    return float(np.median(xs))
