"""Linear mixed models with correlated per-group random effects, fit by REML.

The model is ``y = X beta + Z_g b_g + e`` with ``b_g ~ N(0, sigma^2 L L')`` and
``e ~ N(0, sigma^2 I)``. Fixed effects and ``sigma^2`` are profiled out, so the
optimizer only searches over the lower-triangular relative covariance factor
``L`` (diagonal on the log scale). Per-group cross-products are computed once,
making each deviance evaluation independent of the number of rows.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .battery import RegressionSpec
from .ols import CoefficientEstimate

logger = logging.getLogger(__name__)

MAX_EVALS = 5000
REL_TOL = 1e-8
# log-diagonal bounds; exp(-20) is an effectively zero relative SD
LOG_DIAG_BOUNDS = (-20.0, 10.0)
Z_975 = stats.norm.ppf(0.975)


@dataclass
class MixedModelFit:
    fixed: list[CoefficientEstimate]
    random_sd: dict[str, float]
    random_corr: np.ndarray
    residual_sd: float
    reml_deviance: float
    converged: bool
    initial_deviance: float = float("nan")
    n_obs: int = 0
    n_groups: int = 0
    n_evals: int = 0
    theta: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __getitem__(self, name: str) -> CoefficientEstimate:
        for c in self.fixed:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def random_names(self) -> list[str]:
        return list(self.random_sd)

    def to_dict(self) -> dict:
        return {
            "fixed": [c.to_dict() for c in self.fixed],
            "random_sd": dict(self.random_sd),
            "random_corr": self.random_corr.tolist(),
            "residual_sd": self.residual_sd,
            "reml_deviance": self.reml_deviance,
            "initial_deviance": self.initial_deviance,
            "converged": self.converged,
            "n_obs": self.n_obs,
            "n_groups": self.n_groups,
            "n_evals": self.n_evals,
        }


class REMLProblem:
    """Sufficient statistics and the profiled REML deviance for one design."""

    def __init__(self, y, X, Z, groups):
        y = np.asarray(y, dtype=float)
        X = np.asarray(X, dtype=float)
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        labels, codes = np.unique(np.asarray(groups), return_inverse=True)
        if len(labels) < 2:
            raise ValueError("mixed model needs at least 2 groups")
        self.n, self.p = X.shape
        self.q = Z.shape[1]
        if self.n <= self.p:
            raise ValueError("need more rows than fixed effects")
        if np.linalg.matrix_rank(X) < self.p:
            raise ValueError("fixed-effects design is rank deficient")
        self.groups = labels
        G = len(labels)
        XY = np.column_stack([X, y])
        self.ZtZ = np.zeros((G, self.q, self.q))
        self.ZtXY = np.zeros((G, self.q, self.p + 1))
        for g in range(G):
            rows = codes == g
            Zg = Z[rows]
            self.ZtZ[g] = Zg.T @ Zg
            self.ZtXY[g] = Zg.T @ XY[rows]
        self.XYtXY = XY.T @ XY
        self.tril = np.tril_indices(self.q)
        self.diag_pos = [i for i, (r, c) in enumerate(zip(*self.tril)) if r == c]

    @property
    def n_theta(self) -> int:
        return self.q * (self.q + 1) // 2

    def factor(self, theta) -> np.ndarray:
        L = np.zeros((self.q, self.q))
        vals = np.array(theta, dtype=float)
        vals[self.diag_pos] = np.exp(vals[self.diag_pos])
        L[self.tril] = vals
        return L

    def initial_theta(self) -> np.ndarray:
        # relative covariance L L' = 0.5 I
        theta = np.zeros(self.n_theta)
        theta[self.diag_pos] = 0.5 * np.log(0.5)
        return theta

    def _pieces(self, theta):
        L = self.factor(theta)
        M = np.eye(self.q) + np.einsum("ji,gjk,kl->gil", L, self.ZtZ, L)
        A = np.einsum("ji,gjk->gik", L, self.ZtXY)
        sol = np.linalg.solve(M, A)
        S = self.XYtXY - np.einsum("gji,gjk->ik", A, sol)
        logdet_M = float(np.sum(np.linalg.slogdet(M)[1]))
        p = self.p
        XtVX, XtVy, ytVy = S[:p, :p], S[:p, p], S[p, p]
        beta = np.linalg.solve(XtVX, XtVy)
        r2 = float(ytVy - beta @ XtVy)
        return L, logdet_M, XtVX, beta, r2

    def deviance(self, theta) -> float:
        try:
            _, logdet_M, XtVX, _, r2 = self._pieces(theta)
        except np.linalg.LinAlgError:
            return np.inf
        dof = self.n - self.p
        if not r2 > 0:
            return np.inf
        logdet_X = np.linalg.slogdet(XtVX)[1]
        return float(logdet_M + logdet_X + dof * (1.0 + np.log(2.0 * np.pi * r2 / dof)))

    def estimates(self, theta):
        L, _, XtVX, beta, r2 = self._pieces(theta)
        sigma2 = r2 / (self.n - self.p)
        cov_beta = sigma2 * np.linalg.inv(XtVX)
        cov_re = sigma2 * (L @ L.T)
        return beta, cov_beta, sigma2, cov_re


def fit_reml(y, X, Z, groups, fixed_names: Sequence[str], random_names: Sequence[str],
             start=None, max_evals: int = MAX_EVALS, rel_tol: float = REL_TOL) -> MixedModelFit:
    """REML fit by bounded Nelder-Mead on the relative covariance factor."""
    prob = REMLProblem(y, X, Z, groups)
    theta0 = prob.initial_theta() if start is None else np.asarray(start, dtype=float)
    f0 = prob.deviance(theta0)
    bounds = [LOG_DIAG_BOUNDS if i in prob.diag_pos else (None, None) for i in range(prob.n_theta)]
    scale = max(1.0, abs(f0)) if np.isfinite(f0) else 1.0
    # Termination is on the relative spread of deviances only: at a boundary the
    # factor has flat ridges, so the simplex need not shrink in every direction.
    # One restart from the optimum guards against premature collapse.
    theta, fun, n_evals, success, message = theta0, f0, 0, False, ""
    for _ in range(2):
        res = optimize.minimize(
            prob.deviance, theta, method="Nelder-Mead", bounds=bounds,
            options={"maxfev": max_evals - n_evals, "xatol": np.inf,
                     "fatol": rel_tol * scale, "adaptive": prob.n_theta > 3},
        )
        n_evals += int(res.nfev)
        improved = fun - res.fun
        theta, fun, success, message = res.x, float(res.fun), bool(res.success), res.message
        if not success or improved <= rel_tol * scale or n_evals >= max_evals:
            break
    if not success:
        logger.warning("REML optimizer stopped without converging: %s", message)
    beta, cov_beta, sigma2, cov_re = prob.estimates(theta)
    se = np.sqrt(np.diag(cov_beta))
    z = beta / se
    pvals = 2 * stats.norm.sf(np.abs(z))
    fixed = [CoefficientEstimate(nm, float(b), float(s), float(b - Z_975 * s),
                                 float(b + Z_975 * s), float(pv), None, float(zv))
             for nm, b, s, pv, zv in zip(fixed_names, beta, se, pvals, z)]
    sd = np.sqrt(np.clip(np.diag(cov_re), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = cov_re / np.outer(sd, sd)
    corr[~np.isfinite(corr)] = 0.0
    np.fill_diagonal(corr, 1.0)
    corr = np.clip(corr, -1.0, 1.0)
    return MixedModelFit(
        fixed=fixed,
        random_sd={nm: float(s) for nm, s in zip(random_names, sd)},
        random_corr=corr,
        residual_sd=float(np.sqrt(sigma2)),
        reml_deviance=fun,
        converged=success,
        initial_deviance=float(f0),
        n_obs=prob.n,
        n_groups=len(prob.groups),
        n_evals=n_evals,
        theta=theta,
    )


def lmm_fit(spec: RegressionSpec, table: Mapping[str, Sequence], start=None,
            max_evals: int = MAX_EVALS) -> MixedModelFit:
    """Fit ``response ~ fixed + (1 + random_slopes | grouping)`` on a column table.

    Columns are used as given; standardize them beforehand if required.
    """
    n = len(table[spec.response])
    ones = np.ones(n)
    X = np.column_stack([ones] + [np.asarray(table[v], dtype=float) for v in spec.fixed])
    Z = np.column_stack([ones] + [np.asarray(table[v], dtype=float) for v in spec.random_slopes])
    names = ["(Intercept)"] + list(spec.fixed)
    re_names = ["(Intercept)"] + list(spec.random_slopes)
    return fit_reml(table[spec.response], X, Z, table[spec.grouping], names, re_names,
                    start=start, max_evals=max_evals)
