"""Local linear regression with tricube weights (LOESS, degree 1, no robustness steps)."""

from __future__ import annotations

import math

import numpy as np


def loess(x, y, span: float = 0.75, query=None) -> np.ndarray:
    """Fitted values at ``query`` (default: at ``x``).

    Each query point uses tricube weights scaled by the distance to its
    ``ceil(span * n)``-th nearest neighbour. When the weighted x-spread is
    zero the local weighted mean is returned instead of a line.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 5 or y.size != n:
        raise ValueError("loess needs at least 5 (x, y) pairs")
    if not 0 < span <= 1:
        raise ValueError("span must lie in (0, 1]")
    q = max(2, math.ceil(span * n))
    xq = x if query is None else np.atleast_1d(np.asarray(query, dtype=float))
    out = np.empty(xq.size)
    for i, x0 in enumerate(xq):
        d = np.abs(x - x0)
        h = np.sort(d)[q - 1]
        if h > 0:
            w = np.clip(1 - (d / h) ** 3, 0.0, None) ** 3
        else:
            w = (d == 0).astype(float)
        if w.sum() == 0:
            w = (d <= h).astype(float)
        xm = np.sum(w * x) / w.sum()
        ym = np.sum(w * y) / w.sum()
        sxx = np.sum(w * (x - xm) ** 2)
        if sxx <= 1e-14 * max(1.0, np.sum(w * x * x)):
            out[i] = ym
        else:
            slope = np.sum(w * (x - xm) * (y - ym)) / sxx
            out[i] = ym + slope * (x0 - xm)
    return out
