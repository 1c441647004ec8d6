"""Penalized solvers: oracles and optimality certificates.

Every expected value here is derived independently of the implementation:
closed-form soft thresholding on orthonormal designs, least squares at
lam=0, KKT residuals recomputed from raw gradients, and finite-difference
checks of the logistic objective.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featforge.errors import ConvergenceError, DataError
from featforge.sparse import (
    CvCurve,
    SparseFit,
    lambda_grid,
    lambda_max,
    lasso_cv,
    lasso_fit,
    lasso_path,
    logistic_l1_fit,
    logistic_lambda_max,
    logistic_ridge_fit,
    r2_score,
    ridge_fit,
    standardize,
)


def soft(z, t):
    # local soft-threshold reference, kept separate from the implementation
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def lasso_kkt(X, y, beta, lam):
    """Max violation of the stationarity conditions, from raw arrays."""
    n = X.shape[0]
    g = X.T @ (y - X @ beta) / n
    resid = 0.0
    for j in range(X.shape[1]):
        if beta[j] == 0.0:
            resid = max(resid, max(abs(g[j]) - lam, 0.0))
        else:
            resid = max(resid, abs(g[j] - lam * np.sign(beta[j])))
    return resid


def orthonormal_design(rng, n, p):
    Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    return Q * np.sqrt(n)  # columns obey X^T X / n = I


def random_instance(rng, n=None, p=None):
    n = n or int(rng.integers(20, 120))
    p = p or int(rng.integers(2, 40))
    X = rng.standard_normal((n, p))
    X, _ = standardize(X)
    beta_true = np.zeros(p)
    k = int(rng.integers(1, max(2, p // 3)))
    beta_true[rng.choice(p, size=min(k, p), replace=False)] = rng.normal(0, 2, size=min(k, p))
    y = X @ beta_true + 0.1 * rng.standard_normal(n)
    y = y - y.mean()
    lam = float(rng.uniform(0.01, 0.9)) * max(lambda_max(X, y), 1e-12)
    return X, y, lam


# ---------------------------------------------------------------------------
# lasso


def test_soft_threshold_oracle_on_orthonormal_design():
    rng = np.random.default_rng(42)
    for trial in range(20):
        n, p = 80, 12
        X = orthonormal_design(rng, n, p)
        y = rng.standard_normal(n)
        y = y - y.mean()
        lam = float(rng.uniform(0.01, 0.5))
        expected = soft(X.T @ y / n, lam)
        fit = lasso_fit(X, y, lam)
        assert np.max(np.abs(fit.coef - expected)) <= 1e-8


def test_lam_zero_matches_least_squares():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((60, 8))
    X, _ = standardize(X)
    y = rng.standard_normal(60)
    y = y - y.mean()
    expected, *_ = np.linalg.lstsq(X, y, rcond=None)
    fit = lasso_fit(X, y, 0.0)
    assert np.max(np.abs(fit.coef - expected)) <= 1e-7


def test_lambda_max_boundary():
    rng = np.random.default_rng(11)
    X, y, _ = random_instance(rng, n=100, p=15)
    lmax = lambda_max(X, y)
    assert len(lasso_fit(X, y, lmax).support) == 0
    assert len(lasso_fit(X, y, 0.99 * lmax).support) > 0


def test_kkt_residual_reported_and_recomputed():
    rng = np.random.default_rng(3)
    for _ in range(25):
        X, y, lam = random_instance(rng)
        fit = lasso_fit(X, y, lam)
        assert fit.kkt_residual <= 1e-6
        assert lasso_kkt(X, y, fit.coef, lam) <= 1e-6


@given(st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_kkt_property(seed):
    rng = np.random.default_rng(seed)
    X, y, lam = random_instance(rng)
    fit = lasso_fit(X, y, lam)
    assert lasso_kkt(X, y, fit.coef, lam) <= 1e-6


def test_warm_start_agrees_with_cold_start():
    rng = np.random.default_rng(5)
    X, y, lam = random_instance(rng, n=100, p=30)
    cold = lasso_fit(X, y, lam)
    warm0 = lasso_fit(X, y, lam * 2).coef
    warm = lasso_fit(X, y, lam, beta0=warm0)
    assert np.max(np.abs(cold.coef - warm.coef)) <= 1e-8


def test_lasso_rejects_bad_inputs():
    X = np.eye(4)
    with pytest.raises(DataError):
        lasso_fit(X, np.ones(3), 0.1)
    with pytest.raises(DataError):
        lasso_fit(X, np.ones(4), -0.5)


def test_convergence_error_carries_best_iterate():
    rng = np.random.default_rng(9)
    base = rng.standard_normal((50, 1))
    X = np.hstack([base + 1e-8 * rng.standard_normal((50, 1)) for _ in range(12)])
    X, _ = standardize(X)
    y = X[:, 0] + 0.01 * rng.standard_normal(50)
    y = y - y.mean()
    # an exactly-zero tolerance is unreachable in floats, so the solver must
    # give up and surface its best iterate
    with pytest.raises(ConvergenceError) as err:
        lasso_fit(X, y, 1e-6, kkt_tol=0.0)
    assert err.value.fit is not None
    assert isinstance(err.value.fit, SparseFit)
    assert not err.value.fit.converged


def test_path_walks_descending_grid():
    rng = np.random.default_rng(13)
    X, y, _ = random_instance(rng, n=120, p=20)
    fits = lasso_path(X, y, k=40)
    lams = [f.lam for f in fits]
    assert lams == sorted(lams, reverse=True)
    assert len(fits[0].support) == 0  # grid starts at lambda_max
    assert len(fits[-1].support) > 0


def test_path_support_cap_stops_walk():
    rng = np.random.default_rng(17)
    X, y, _ = random_instance(rng, n=60, p=30)
    fits = lasso_path(X, y, k=60, support_cap=3)
    assert all(len(f.support) <= 3 for f in fits[:-1])
    assert len(fits) < 60


def test_lambda_grid_contract():
    with pytest.raises(DataError):
        lambda_grid(1.0, 0)
    assert np.all(lambda_grid(0.0, 5) == 0)
    g = lambda_grid(2.0, 10, min_ratio=1e-2)
    assert g[0] == 2.0 and abs(g[-1] - 0.02) < 1e-12
    ratios = g[1:] / g[:-1]
    assert np.allclose(ratios, ratios[0])


def test_lasso_cv_returns_valid_choice():
    rng = np.random.default_rng(19)
    X, y, _ = random_instance(rng, n=150, p=25)
    fit, curve = lasso_cv(X, y, seed=4, k=50)
    assert isinstance(curve, CvCurve)
    assert curve.idx_1se <= curve.idx_min  # 1-SE prefers the larger lambda
    assert fit.lam == curve.lams[curve.idx_1se]
    assert lasso_kkt(X, y, fit.coef, fit.lam) <= 1e-6
    again, _ = lasso_cv(X, y, seed=4, k=50)
    assert np.array_equal(fit.coef, again.coef)


def test_lasso_cv_respects_support_cap():
    rng = np.random.default_rng(23)
    X, y, _ = random_instance(rng, n=80, p=40)
    fit, _ = lasso_cv(X, y, seed=0, k=60, support_cap=5)
    assert len(fit.support) <= 5


# ---------------------------------------------------------------------------
# logistic


def logistic_objective(X, y, beta, b, lam):
    z = b + X @ beta
    # stable log(1 + exp(z)) without overflow
    softplus = np.where(z > 30, z, np.log1p(np.exp(np.minimum(z, 30))))
    nll = float(np.mean(softplus - y * z))
    return nll + lam * float(np.sum(np.abs(beta)))


def logistic_instance(rng, n=120, p=10):
    X = rng.standard_normal((n, p))
    X, _ = standardize(X)
    beta_true = np.zeros(p)
    beta_true[: max(1, p // 4)] = rng.normal(0, 1.5, max(1, p // 4))
    prob = 1.0 / (1.0 + np.exp(-(X @ beta_true)))
    y = (rng.uniform(size=n) < prob).astype(np.float64)
    if y.min() == y.max():
        y[0] = 1.0 - y[0]
    lam = 0.3 * logistic_lambda_max(X, y)
    return X, y, lam


def test_logistic_kkt_and_finite_difference():
    rng = np.random.default_rng(29)
    for _ in range(10):
        X, y, lam = logistic_instance(rng)
        fit = logistic_l1_fit(X, y, lam)
        assert fit.kkt_residual <= 1e-5
        # subgradient check from raw arrays
        z = fit.intercept + X @ fit.coef
        prob = 1.0 / (1.0 + np.exp(-z))
        g = X.T @ (y - prob) / len(y)
        for j in range(X.shape[1]):
            if fit.coef[j] == 0.0:
                assert abs(g[j]) <= lam + 1e-5
            else:
                assert abs(g[j] - lam * np.sign(fit.coef[j])) <= 1e-5
        assert abs(np.mean(y - prob)) <= 1e-5  # free intercept stationarity
        # no coordinate step improves the objective to first order
        f0 = logistic_objective(X, y, fit.coef, fit.intercept, lam)
        h = 1e-6
        for j in range(X.shape[1]):
            for sign in (+1, -1):
                beta_h = fit.coef.copy()
                beta_h[j] += sign * h
                fh = logistic_objective(X, y, beta_h, fit.intercept, lam)
                assert fh >= f0 - 1e-9


def test_logistic_lambda_max_boundary():
    rng = np.random.default_rng(31)
    X, y, _ = logistic_instance(rng)
    lmax = logistic_lambda_max(X, y)
    fit = logistic_l1_fit(X, y, lmax * 1.001)
    assert len(fit.support) == 0


# ---------------------------------------------------------------------------
# dense fits and metrics


def test_ridge_matches_closed_form():
    rng = np.random.default_rng(37)
    X = rng.standard_normal((80, 6))
    y = rng.standard_normal(80)
    alpha = 0.37
    coef, intercept = ridge_fit(X, y, alpha)
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    expected = np.linalg.solve(Xc.T @ Xc + alpha * np.eye(6), Xc.T @ yc)
    assert np.allclose(coef, expected, atol=1e-10)
    assert np.isclose(intercept, y.mean() - X.mean(axis=0) @ coef)


def test_logistic_ridge_gradient_vanishes():
    rng = np.random.default_rng(41)
    X, y, _ = logistic_instance(rng, n=150, p=5)
    alpha = 0.05
    coef, intercept = logistic_ridge_fit(X, y, alpha)
    z = intercept + X @ coef
    prob = 1.0 / (1.0 + np.exp(-z))
    grad = X.T @ (prob - y) + alpha * coef  # intercept is unpenalized
    assert np.max(np.abs(grad)) <= 1e-7
    assert abs(np.sum(prob - y)) <= 1e-7


def test_r2_score_hand_values():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    assert r2_score(y, y) == 1.0
    assert r2_score(y, np.full(4, y.mean())) == 0.0
    assert r2_score(y, y + 1.0) < 1.0
    with pytest.raises(DataError):
        r2_score(y, y[:3])
    with pytest.raises(DataError):
        r2_score(np.array([1.0]), np.array([1.0]))
    with pytest.raises(DataError):
        r2_score(np.full(4, 2.0), y)


def test_standardize_and_replay():
    rng = np.random.default_rng(43)
    X = rng.standard_normal((50, 3)) * np.array([2.0, 0.5, 1.0]) + 1.0
    X[:, 2] = 7.0  # constant column
    Z, stats = standardize(X)
    assert np.allclose(Z[:, :2].mean(axis=0), 0, atol=1e-12)
    assert np.allclose(Z[:, :2].std(axis=0), 1, atol=1e-12)
    assert np.all(Z[:, 2] == 0.0)
    assert bool(stats.constant[2]) and not stats.constant[0]
    Z2 = stats.apply(X)
    assert np.array_equal(Z, Z2)
    with pytest.raises(DataError):
        standardize(np.ones(5))
