from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from irregphon.stats import (RankDeficientError, RegressionSpec, benjamini_hochberg,
                             build_spec_battery, fit_reml, lmm_fit, loess, ols_fit, spearman,
                             standardize)
from irregphon.stats.lmm import REMLProblem
from simdata import anova_reml_sigma, balanced_intercepts, random_slope_data, zero_variance_data


def design(x):
    return np.column_stack([np.ones(len(x)), x])


class TestStandardize:
    def test_example(self):
        assert standardize([1, 2, 3]).tolist() == [-1.0, 0.0, 1.0]

    def test_constant(self):
        with pytest.raises(ValueError, match="FR"):
            standardize([2, 2, 2], "FR")

    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50))
    def test_moments(self, xs):
        x = np.array(xs)
        if x.std(ddof=1) < 1e-6:
            return
        z = standardize(x)
        assert abs(z.mean()) < 1e-10 and abs(z.std(ddof=1) - 1) < 1e-10


def normal_equations(X, y):
    return np.linalg.solve(X.T @ X, X.T @ y)


class TestOLS:
    def test_noiseless_line(self):
        x = np.arange(10.0)
        fit = ols_fit(2 * x, design(x), ["(Intercept)", "x"])
        assert fit["x"].beta == pytest.approx(2.0, abs=1e-10)
        assert fit.r2 == pytest.approx(1.0)

    def test_duplicate_column(self):
        x = np.arange(6.0)
        with pytest.raises(RankDeficientError) as info:
            ols_fit(x, np.column_stack([np.ones(6), x, x]), ["c", "x", "x2"])
        assert info.value.columns == ["x2"]

    def test_five_points_frozen(self):
        # normal equations by hand: Sxy = 22, Sxx = 10
        x = np.array([0, 1, 2, 3, 4.0])
        y = np.array([1, 3, 5, 7, 10.0])
        fit = ols_fit(y, design(x))
        assert fit.coefficients[1].beta == pytest.approx(2.2, abs=1e-12)
        assert fit.coefficients[0].beta == pytest.approx(0.8, abs=1e-12)

    def test_inference_matches_textbook(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=30)
        y = 1 + 0.3 * x + rng.normal(size=30)
        fit = ols_fit(y, design(x))
        ref = sps.linregress(x, y)
        c = fit.coefficients[1]
        assert c.se == pytest.approx(ref.stderr, rel=1e-10)
        assert c.p_raw == pytest.approx(ref.pvalue, rel=1e-8)
        q = sps.t.ppf(0.975, 28)
        assert c.ci_low == pytest.approx(c.beta - q * c.se) and c.ci_low < c.ci_high

    @settings(max_examples=40)
    @given(st.integers(0, 10**6), st.integers(1, 4), st.integers(8, 40))
    def test_residual_orthogonality_and_oracle(self, seed, p, n):
        rng = np.random.default_rng(seed)
        X = np.column_stack([np.ones(n), rng.normal(size=(n, p))])
        y = X @ rng.normal(size=p + 1) + rng.normal(size=n)
        fit = ols_fit(y, X)
        beta = np.array([c.beta for c in fit.coefficients])
        assert np.allclose(beta, normal_equations(X, y), atol=1e-8, rtol=0)
        scale = np.linalg.norm(X, axis=0) * max(np.linalg.norm(fit.residuals), 1.0)
        assert np.all(np.abs(X.T @ fit.residuals) / scale < 1e-8)

    def test_standardization_scales_beta(self):
        rng = np.random.default_rng(5)
        x = rng.normal(3, 2.5, size=50)
        y = 0.4 * x + rng.normal(size=50)
        raw = ols_fit(y, design(x)).coefficients[1]
        std = ols_fit(y, design(standardize(x))).coefficients[1]
        assert std.beta == pytest.approx(raw.beta * x.std(ddof=1), rel=1e-10)
        assert abs(std.stat - raw.stat) < 1e-8


def bh_brute_force(p):
    m = len(p)
    out = []
    for pi in p:
        best = 1.0
        for pj in p:
            if pj >= pi:
                rank = sum(1 for pl in p if pl <= pj)
                best = min(best, pj * (m / rank))
        out.append(best)
    return out


class TestBH:
    def test_examples(self):
        assert benjamini_hochberg([0.01, 0.02, 0.03, 0.04]) == pytest.approx([0.04] * 4, abs=1e-15)
        assert benjamini_hochberg([0.3]) == [0.3]
        assert benjamini_hochberg([0.2] * 5) == pytest.approx([0.2] * 5, abs=1e-15)

    def test_range(self):
        with pytest.raises(ValueError):
            benjamini_hochberg([0.1, 1.2])

    def test_random_vectors(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            m = int(rng.integers(1, 12))
            p = rng.random(m)
            if rng.random() < 0.3:
                p = np.round(p, 1)  # ties
            adj = benjamini_hochberg(p)
            assert adj == bh_brute_force(p.tolist())
            assert all(a >= r for a, r in zip(adj, p))
            order = np.argsort(p)
            assert np.all(np.diff(np.array(adj)[order]) >= 0)


def midranks(v):
    return [Fraction(sum(1 for u in v if u < x)) + Fraction(sum(1 for u in v if u == x) + 1, 2) for x in v]


def spearman_oracle(x, y):
    rx, ry = midranks(x), midranks(y)
    n = len(x)
    mx, my = sum(rx) / n, sum(ry) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    sxx = sum((a - mx) ** 2 for a in rx)
    syy = sum((b - my) ** 2 for b in ry)
    return float(sxy) / math.sqrt(float(sxx) * float(syy))


class TestSpearman:
    def test_examples(self):
        assert spearman([1, 2, 3, 4], [1, 2, 3, 4])[0] == 1.0
        assert spearman([1, 2, 3, 4], [4, 3, 2, 1])[0] == -1.0
        rho, p = spearman([1, 2, 3, 4, 5], [1, 3, 2, 5, 4])
        assert rho == pytest.approx(0.8, abs=1e-15)
        t = 0.8 * math.sqrt(3 / (1 - 0.64))
        assert p == pytest.approx(2 * sps.t.sf(t, 3), rel=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            spearman([1, 1, 1], [1, 2, 3])
        with pytest.raises(ValueError):
            spearman([1, 2], [1, 2])

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=3, max_size=25))
    def test_oracle_exact(self, pairs):
        x, y = [a for a, _ in pairs], [b for _, b in pairs]
        if len(set(x)) < 2 or len(set(y)) < 2:
            return
        assert spearman(x, y)[0] == spearman_oracle(x, y)

    @given(st.lists(st.tuples(st.integers(-40, 40), st.integers(-40, 40)), min_size=3, max_size=20))
    def test_monotone_invariance(self, pairs):
        x = np.array([a for a, _ in pairs], dtype=float)
        y = np.array([b for _, b in pairs], dtype=float)
        if len(set(x)) < 2 or len(set(y)) < 2:
            return
        assert spearman(x, y)[0] == spearman(np.exp(x / 10), y ** 3 + y)[0]


def loess_oracle(x, y, x0, span):
    """Weighted least squares at x0 via an explicit 2x2 solve."""
    n = len(x)
    q = math.ceil(span * n)
    d = np.abs(x - x0)
    h = sorted(d)[q - 1]
    w = np.where(d < h, (1 - (d / h) ** 3) ** 3, 0.0)
    A = np.array([[w.sum(), (w * x).sum()], [(w * x).sum(), (w * x * x).sum()]])
    b = np.array([(w * y).sum(), (w * x * y).sum()])
    a0, a1 = np.linalg.solve(A, b)
    return a0 + a1 * x0


class TestLoess:
    def test_line(self):
        x = np.linspace(0, 10, 23)
        assert np.allclose(loess(x, 3 * x - 2), 3 * x - 2, atol=1e-8, rtol=0)

    def test_constant(self):
        x = np.arange(9.0)
        assert np.allclose(loess(x, np.full(9, 4.2)), 4.2, atol=1e-12)

    def test_seven_point_curve(self):
        x = np.array([0.0, 1.0, 1.5, 3.0, 4.0, 5.5, 7.0])
        y = np.array([1.0, 2.7, 2.2, 5.1, 4.0, 7.9, 6.5])
        q = np.linspace(0, 7, 15)
        expected = [loess_oracle(x, y, x0, 0.75) for x0 in q]
        assert np.allclose(loess(x, y, 0.75, q), expected, atol=1e-8, rtol=0)

    def test_degenerate(self):
        x = np.array([1.0, 1, 1, 1, 1, 5])
        y = np.array([1.0, 2, 3, 4, 5, 9])
        assert loess(x, y, 0.5, [1.0])[0] == pytest.approx(3.0)
        with pytest.raises(ValueError):
            loess([1, 2, 3], [1, 2, 3])


class TestBattery:
    def test_rows(self):
        b = build_spec_battery()
        assert [s.name for s in b] == ["MI~PC", "PC~WL", "MI~FR", "PC~FR", "MI~WL", "WL~FR"]
        assert set(b[0].fixed) >= {"PC", "FR", "WL", "mean(PC)", "mean(WL)"}
        assert b[5].fixed == ("FR",) and b[5].random_slopes == ("FR",)
        assert all("mean(FR)" not in s.fixed for s in b)

    def test_validation(self):
        with pytest.raises(ValueError):
            RegressionSpec("MI", ("PC",), ("WL",))
        with pytest.raises(ValueError):
            RegressionSpec("MI", (), ())


class TestLMM:
    spec = RegressionSpec("y", ("x",), ("x",))

    def test_zero_group_variance_matches_ols(self):
        y, x, g = zero_variance_data(0)
        fit = lmm_fit(self.spec, {"y": y, "x": x, "language": g})
        ols = ols_fit(y, design(x))
        for a, b in zip(fit.fixed, ols.coefficients):
            assert abs(a.beta - b.beta) < 1e-4
        assert all(s < 0.01 for s in fit.random_sd.values())

    def test_balanced_intercept_closed_form(self):
        y, g = balanced_intercepts(3)
        X = np.ones((len(y), 1))
        fit = fit_reml(y, X, X, g, ["(Intercept)"], ["(Intercept)"])
        sd_b, sd_e = anova_reml_sigma(y, g)
        assert abs(fit.random_sd["(Intercept)"] - sd_b) < 1e-3
        assert abs(fit.residual_sd - sd_e) < 1e-3
        assert fit.converged

    def test_wald_interval(self):
        y, x, g = random_slope_data(1, n_groups=10, n_per=100)
        fit = lmm_fit(self.spec, {"y": y, "x": x, "language": g})
        c = fit["x"]
        z = sps.norm.ppf(0.975)
        assert c.ci_low == pytest.approx(c.beta - z * c.se) and c.ci_high == pytest.approx(c.beta + z * c.se)
        assert c.p_raw == pytest.approx(2 * sps.norm.sf(abs(c.beta / c.se)))
        corr = fit.random_corr
        assert np.allclose(corr, corr.T) and np.allclose(np.diag(corr), 1.0)
        assert np.linalg.eigvalsh(corr).min() > -1e-10

    def test_deviance_decreases_and_restarts_agree(self):
        y, x, g = random_slope_data(2, n_groups=15, n_per=200)
        table = {"y": y, "x": x, "language": g}
        fit = lmm_fit(self.spec, table)
        assert fit.reml_deviance <= fit.initial_deviance
        rng = np.random.default_rng(0)
        for _ in range(5):
            start = rng.normal(0, 0.5, size=3)
            other = lmm_fit(self.spec, table, start=start)
            for a, b in zip(fit.fixed, other.fixed):
                assert abs(a.beta - b.beta) < 1e-3

    def test_deviance_matches_dense_formula(self):
        # REML deviance from the full n x n marginal covariance
        y, x, g = random_slope_data(4, n_groups=4, n_per=15)
        X = design(x)
        prob = REMLProblem(y, X, X, g)
        theta = np.array([0.1, 0.3, -0.4])
        L = prob.factor(theta)
        Z = np.zeros((len(y), 2 * 4))
        for k in range(4):
            Z[g == k, 2 * k:2 * k + 2] = X[g == k]
        Lam = np.kron(np.eye(4), L)
        V = np.eye(len(y)) + Z @ Lam @ Lam.T @ Z.T
        Vi = np.linalg.inv(V)
        XtViX = X.T @ Vi @ X
        beta = np.linalg.solve(XtViX, X.T @ Vi @ y)
        r = y - X @ beta
        dof = len(y) - 2
        s2 = r @ Vi @ r / dof
        dense = (np.linalg.slogdet(V)[1] + np.linalg.slogdet(XtViX)[1]
                 + dof * (1 + np.log(2 * np.pi * s2)))
        assert prob.deviance(theta) == pytest.approx(dense, rel=1e-10)

    def test_needs_two_groups(self):
        with pytest.raises(ValueError):
            lmm_fit(self.spec, {"y": np.arange(5.0), "x": np.arange(5.0) ** 2, "language": np.zeros(5)})

    def test_max_evals_reports_nonconvergence(self):
        y, x, g = random_slope_data(5, n_groups=8, n_per=50)
        fit = lmm_fit(self.spec, {"y": y, "x": x, "language": g}, max_evals=5)
        assert not fit.converged and fit.n_evals <= 6
