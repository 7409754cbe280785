"""Standardization and ordinary least squares with t-based inference."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg, stats


class RankDeficientError(ValueError):
    def __init__(self, columns: list[str]):
        self.columns = columns
        super().__init__(f"design matrix is rank deficient; collinear columns: {', '.join(columns)}")


@dataclass
class CoefficientEstimate:
    name: str
    beta: float
    se: float
    ci_low: float
    ci_high: float
    p_raw: float
    p_adj: float | None = None
    stat: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OLSFit:
    coefficients: list[CoefficientEstimate]
    n: int
    df_resid: int
    sigma2: float
    r2: float
    residuals: np.ndarray

    def __getitem__(self, name: str) -> CoefficientEstimate:
        for c in self.coefficients:
            if c.name == name:
                return c
        raise KeyError(name)


def standardize(x, name: str = "x") -> np.ndarray:
    """Center and scale by the sample (n-1) standard deviation."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise ValueError(f"cannot standardize {name}: need at least 2 values")
    sd = x.std(ddof=1)
    if not sd > 0:
        raise ValueError(f"cannot standardize {name}: zero variance")
    return (x - x.mean()) / sd


def collinear_columns(X: np.ndarray, names: Sequence[str]) -> list[str]:
    """Columns that add nothing to the span of the columns before them."""
    kept: list[int] = []
    bad = []
    for j in range(X.shape[1]):
        if np.linalg.matrix_rank(X[:, kept + [j]]) > len(kept):
            kept.append(j)
        else:
            bad.append(names[j])
    return bad


def ols_fit(y, X, names: Sequence[str] | None = None, level: float = 0.95) -> OLSFit:
    """Least squares via QR. ``X`` must already contain the intercept column."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(p)]
    if n <= p:
        raise ValueError(f"need more rows ({n}) than columns ({p})")
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficientError(collinear_columns(X, names))
    Q, R = np.linalg.qr(X)
    beta = linalg.solve_triangular(R, Q.T @ y)
    resid = y - X @ beta
    df = n - p
    sigma2 = float(resid @ resid) / df
    R_inv = linalg.solve_triangular(R, np.eye(p))
    se = np.sqrt(sigma2 * np.sum(R_inv**2, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    p_raw = 2 * stats.t.sf(np.abs(t), df)
    q = stats.t.ppf(0.5 + level / 2, df)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else float("nan")
    coefs = [CoefficientEstimate(nm, float(b), float(s), float(b - q * s), float(b + q * s),
                                 float(pv), None, float(tv))
             for nm, b, s, pv, tv in zip(names, beta, se, p_raw, t)]
    return OLSFit(coefs, n, df, sigma2, r2, resid)
