"""Spearman rank correlation with mid-ranks for ties."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats


def spearman(x, y) -> tuple[float, float]:
    """Return ``(rho, p)``; ``p`` is two-sided from a t statistic with n-2 df."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d and of equal length")
    n = x.size
    if n < 3:
        raise ValueError("spearman needs at least 3 pairs")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("spearman is undefined for a constant vector")
    rx = stats.rankdata(x) - (n + 1) / 2
    ry = stats.rankdata(y) - (n + 1) / 2
    # mid-ranks are multiples of 1/2, so these sums are exact
    cov = float(np.sum(rx * ry))
    rho = cov / math.sqrt(float(np.sum(rx * rx)) * float(np.sum(ry * ry)))
    if abs(rho) >= 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return rho, float(2 * stats.t.sf(abs(t), n - 2))
