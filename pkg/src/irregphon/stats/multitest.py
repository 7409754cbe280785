"""Benjamini-Hochberg step-up adjustment."""

from __future__ import annotations

import numpy as np


def benjamini_hochberg(p) -> list[float]:
    """BH-adjusted p-values, returned in the input order."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError("expected a flat list of p-values")
    if p.size == 0:
        return []
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    # m / rank >= 1 exactly in floating point, so adjusted >= raw holds bitwise
    scaled = p[order] * (m / np.arange(1, m + 1))
    adjusted = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adjusted, 1.0)
    return out.tolist()
