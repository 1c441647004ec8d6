"""Sparse and dense linear solvers used by the selection cascade.

The lasso objective is (1/2n)||y - X b||^2 + lam*||b||_1 on a standardized
matrix and centered target; coordinate descent runs over an active set with
full gradient passes adding any KKT violators, so returned solutions satisfy
the stationarity conditions to `kkt_tol` rather than merely having stalled.
The L1 logistic path wraps the same weighted inner loop in an IRLS outer
loop (quadratic bound on the logistic loss) with an unpenalized intercept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DataError


@dataclass(frozen=True)
class StandardizationStats:
    """Per-column mean/std captured at fit time; constant columns map to 0."""

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        eff = np.where(self.constant, 1.0, self.std)
        Z = (X - self.mean) / eff
        if self.constant.any():
            Z[:, self.constant] = 0.0
        return Z


def standardize(X: np.ndarray) -> tuple[np.ndarray, StandardizationStats]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"expected a 2-d matrix, got shape {X.shape}")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = std < 1e-12
    stats = StandardizationStats(mean=mean, std=std, constant=constant)
    return stats.apply(X), stats


@dataclass
class SparseFit:
    """Solution of one penalized fit; coefficients live on the input scale."""

    coef: np.ndarray
    intercept: float
    lam: float
    n_iter: int
    kkt_residual: float
    converged: bool = True

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.coef)


def _soft(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def lasso_fit(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    *,
    beta0: np.ndarray | None = None,
    tol: float = 1e-10,
    kkt_tol: float = 1e-6,
    max_sweeps: int = 100_000,
    col_moments: np.ndarray | None = None,
) -> SparseFit:
    """Coordinate descent with active-set passes; KKT-checked on exit.

    X should be column-standardized and y centered; lam >= 0. Raises
    ConvergenceError (carrying the best iterate) if the sweep budget runs
    out before the KKT residual drops below kkt_tol. `col_moments` lets
    warm-started path walks pass diag(X^T X)/n instead of recomputing it.
    """
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if y.shape != (n,):
        raise DataError(f"y has shape {y.shape}, expected ({n},)")
    if lam < 0:
        raise DataError("lam must be nonnegative")
    v = np.einsum("ij,ij->j", X, X) / n if col_moments is None else col_moments
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=np.float64)
    r = y - X @ beta if beta.any() else y.copy()
    active = list(np.flatnonzero(beta))
    sweeps = 0
    inner_tol = tol
    while True:
        # converge the active set (bounded rounds; the KKT check below is
        # the authority, so a stalled inner loop is not a failure by itself)
        round_sweeps = 0
        settled = not active
        while active:
            max_delta = 0.0
            for j in active:
                vj = v[j]
                if vj <= 0.0:
                    continue
                xj = X[:, j]
                bj = beta[j]
                z = bj * vj + (xj @ r) / n
                nb = _soft(z, lam) / vj
                if nb != bj:
                    r -= (nb - bj) * xj
                    beta[j] = nb
                    d = abs(nb - bj)
                    if d > max_delta:
                        max_delta = d
            sweeps += 1
            round_sweeps += 1
            if max_delta < inner_tol:
                settled = True
                break
            if sweeps >= max_sweeps or round_sweeps >= 50:
                break
        r = y - X @ beta
        g = (X.T @ r) / n
        resid = _kkt_residual(g, beta, lam)
        if resid > kkt_tol * 0.5:
            # exact active-set pivoting from the current iterate; adopted
            # when the objective does not increase, which cuts through the
            # slow coordinate-descent crawls between correlated columns
            refined = _active_set_polish(X, y, n, beta, lam)
            if refined is not None and np.all(np.isfinite(refined)):
                obj_cur = 0.5 * float(r @ r) / n + lam * float(np.abs(beta).sum())
                r2 = y - X @ refined
                obj_ref = 0.5 * float(r2 @ r2) / n + lam * float(np.abs(refined).sum())
                if obj_ref <= obj_cur:
                    beta, r = refined, r2
                    g = (X.T @ r) / n
                    resid = _kkt_residual(g, beta, lam)
                    active = sorted(set(active) | set(int(i) for i in np.flatnonzero(beta)))
        if resid <= kkt_tol * 0.5:
            break
        if sweeps >= max_sweeps:
            # the budget is spent; the KKT criterion still decides the verdict
            if resid <= kkt_tol:
                break
            fit = _finish_lasso(beta, lam, sweeps, converged=False, g=g)
            raise ConvergenceError(
                f"lasso did not converge in {max_sweeps} sweeps "
                f"(kkt residual {fit.kkt_residual:.3g})",
                fit=fit,
            )
        active_set = set(active)
        violators = [j for j in np.flatnonzero(np.abs(g) > lam * (1 + 1e-12) + 1e-15) if j not in active_set]
        if violators:
            active.extend(violators)
            continue
        if not active:
            break
        if not settled:
            # round hit its sweep cap while still moving; keep iterating
            continue
        # active set settled but stationarity is loose: sharpen the tolerance
        if inner_tol <= 1e-16:
            break
        inner_tol = max(inner_tol * 1e-2, 1e-16)
    fit = _finish_lasso(beta, lam, sweeps, converged=True, g=g)
    if fit.kkt_residual > kkt_tol:
        fit.converged = False
        raise ConvergenceError(
            f"lasso stalled at float precision (kkt residual {fit.kkt_residual:.3g})",
            fit=fit,
        )
    return fit


def _active_set_polish(X, y, n, beta, lam) -> np.ndarray | None:
    """Exact active-set pivoting started from a coordinate-descent iterate.

    Invariant: every working coordinate is nonzero. Each pivot solves the
    objective restricted to the working support with the L1 term frozen at
    the working signs; a solution that flips a sign is cut back to the
    longest feasible step, landing the crossing coordinate on exactly zero
    so it leaves the support. Once the support is stationary, the worst
    violating coordinate enters along the homotopy direction (the support
    adjusts so its own stationarity is preserved), stepping either to the
    violator's full entry or to the first zero crossing, whichever is
    shorter; the direction form stays valid when the Gram matrix is rank
    deficient, where a naive enlarged solve could flip the entering sign.
    Terminates at exact stationarity, or returns the progress made when the
    pivot budget runs out; None means no usable pivot was found. The caller
    re-checks the objective before adopting the result.
    """
    beta = beta.copy()
    v = np.einsum("ij,ij->j", X, X) / n
    max_pivots = 2 * min(X.shape) + 40
    stationary = False
    for _ in range(max_pivots):
        A = np.flatnonzero(beta)
        if len(A) and not stationary:
            XA = X[:, A]
            G = (XA.T @ XA) / n
            rhs = (XA.T @ y) / n - lam * np.sign(beta[A])
            try:
                sol = np.linalg.solve(G, rhs)
            except np.linalg.LinAlgError:
                sol, *_ = np.linalg.lstsq(G, rhs, rcond=None)
            if not np.all(np.isfinite(sol)):
                return None
            bA = beta[A]
            flips = np.sign(sol) != np.sign(bA)
            if flips.any():
                d = sol - bA
                with np.errstate(divide="ignore", invalid="ignore"):
                    steps = np.where(flips & (d != 0.0), -bA / d, np.inf)
                t = float(np.min(steps[flips]))
                if not np.isfinite(t) or t <= 0.0 or t > 1.0:
                    return beta
                new = bA + t * d
                new[flips & (steps == t)] = 0.0
                beta[A] = new
                continue
            beta[A] = sol
            stationary = True
            continue
        # support is stationary (or empty): bring in the worst violator
        r = y - (X[:, A] @ beta[A] if len(A) else np.zeros(n))
        g = (X.T @ r) / n
        free = beta == 0.0
        if not free.any():
            return beta
        j = int(np.flatnonzero(free)[np.argmax(np.abs(g[free]))])
        viol = abs(g[j]) - lam
        if viol <= lam * 1e-12 + 1e-15:
            return beta
        sj = 1.0 if g[j] > 0 else -1.0
        if len(A):
            XA = X[:, A]
            G = (XA.T @ XA) / n
            Gaj = (XA.T @ X[:, j]) / n
            try:
                h = np.linalg.solve(G, Gaj)
            except np.linalg.LinAlgError:
                h, *_ = np.linalg.lstsq(G, Gaj, rcond=None)
            if not np.all(np.isfinite(h)):
                return None
            dA = -h * sj
            curve = X[:, j] * sj + XA @ dA
        else:
            dA = np.zeros(0)
            curve = X[:, j] * sj
        q = float(curve @ curve) / n
        t_full = viol / q if q > 1e-30 else np.inf
        bA = beta[A]
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = np.where(dA != 0.0, -bA / dA, np.inf)
        cross = np.where(cross > 0.0, cross, np.inf)
        t_cross = float(np.min(cross)) if len(A) else np.inf
        t = min(t_full, t_cross)
        if not np.isfinite(t) or t <= 0.0:
            return beta
        if len(A):
            newA = bA + t * dA
            newA[cross == t] = 0.0
            beta[A] = newA
        beta[j] = t * sj
        # a full entry preserves stationarity; a crossing needs a re-solve
        stationary = t == t_full and t < t_cross
    return beta


def _finish_lasso(beta, lam, sweeps, converged, g) -> SparseFit:
    # g is the gradient at beta, computed by the caller from a fresh residual
    resid = _kkt_residual(g, beta, lam)
    return SparseFit(
        coef=beta.copy(),
        intercept=0.0,
        lam=float(lam),
        n_iter=sweeps,
        kkt_residual=float(resid),
        converged=converged,
    )


def _kkt_residual(g: np.ndarray, beta: np.ndarray, lam: float) -> float:
    nz = beta != 0
    resid = 0.0
    if nz.any():
        resid = float(np.max(np.abs(g[nz] - lam * np.sign(beta[nz]))))
    if (~nz).any():
        slack = float(np.max(np.abs(g[~nz]))) - lam
        if slack > resid:
            resid = slack
    return max(resid, 0.0)


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    n = X.shape[0]
    return float(np.max(np.abs(X.T @ y)) / n) if X.size else 0.0


def lambda_grid(lmax: float, k: int, min_ratio: float = 1e-3) -> np.ndarray:
    """Geometric grid from lmax down to lmax*min_ratio, k points."""
    if k < 1:
        raise DataError("grid needs at least one point")
    if lmax <= 0:
        return np.zeros(k)
    if k == 1:
        return np.array([lmax])
    return np.geomspace(lmax, lmax * min_ratio, k)


def lasso_path(
    X: np.ndarray,
    y: np.ndarray,
    k: int = 100,
    *,
    min_ratio: float = 1e-3,
    support_cap: int | None = None,
    tol: float = 1e-10,
    kkt_tol: float = 1e-6,
) -> list[SparseFit]:
    """Warm-started fits along a descending lambda grid.

    Support sizes usually grow as lambda shrinks but are not forced to:
    coefficients may re-cross zero. With `support_cap` the walk stops after
    the first fit whose support exceeds the cap.
    """
    X = np.asfortranarray(X, dtype=np.float64)
    v = np.einsum("ij,ij->j", X, X) / max(X.shape[0], 1)
    grid = lambda_grid(lambda_max(X, y), k, min_ratio)
    fits: list[SparseFit] = []
    beta = None
    for lam in grid:
        fit = lasso_fit(
            X, y, float(lam), beta0=beta, tol=tol, kkt_tol=kkt_tol, col_moments=v
        )
        fits.append(fit)
        beta = fit.coef
        if support_cap is not None and len(fit.support) > support_cap:
            break
    return fits


@dataclass
class CvCurve:
    """Cross-validation diagnostics for one penalized path."""

    lams: np.ndarray
    mean_error: np.ndarray
    se_error: np.ndarray
    idx_min: int
    idx_1se: int


def _kfold(n: int, k: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    return [np.sort(part) for part in np.array_split(order, k)]


def _pick_lambda(fits, mean_err, se_err, support_cap) -> tuple[int, int]:
    """Min-error and 1-SE grid indices, skipping unchoosable path endpoints.

    A capped path may end on the first fit whose support exceeds the cap,
    and a logistic path may end on a stalled non-converged fit; those points
    exist only to mark the stop and must not be chosen.
    """
    ok = np.array(
        [f.converged and (support_cap is None or len(f.support) <= support_cap) for f in fits]
    )
    if not ok.any():
        ok[:] = True
    idx_min = int(np.argmin(np.where(ok, mean_err, np.inf)))
    threshold = mean_err[idx_min] + se_err[idx_min]
    idx_1se = idx_min
    for gi in range(len(fits)):
        if ok[gi] and mean_err[gi] <= threshold:
            idx_1se = gi
            break
    return idx_min, idx_1se


def lasso_cv(
    X: np.ndarray,
    y: np.ndarray,
    *,
    seed: int = 0,
    k: int = 100,
    folds: int = 5,
    min_ratio: float = 1e-3,
    support_cap: int | None = None,
    one_se: bool = True,
) -> tuple[SparseFit, CvCurve]:
    """K-fold CV over one lambda grid; picks the 1-SE lambda by default.

    The grid comes from the full data; the returned fit is the full-data
    solution at the chosen lambda, restricted to grid points whose full-data
    support respects `support_cap`. Fold fits run at a slightly looser
    stationarity tolerance: they only feed the error curve.
    """
    n = X.shape[0]
    folds = min(folds, n)
    if folds < 2:
        raise DataError("cross-validation needs at least 2 folds")
    X = np.asfortranarray(X, dtype=np.float64)
    full = lasso_path(X, y, k, min_ratio=min_ratio, support_cap=support_cap)
    grid = np.array([f.lam for f in full])
    errors = np.full((folds, len(grid)), np.nan)
    for fi, val_idx in enumerate(_kfold(n, folds, seed)):
        mask = np.ones(n, dtype=bool)
        mask[val_idx] = False
        Xt = np.asfortranarray(X[mask])
        yt = y[mask]
        Xv, yv = X[val_idx], y[val_idx]
        vt = np.einsum("ij,ij->j", Xt, Xt) / max(Xt.shape[0], 1)
        beta = None
        for gi, lam in enumerate(grid):
            fit = lasso_fit(
                Xt, yt, float(lam), beta0=beta, tol=1e-7, kkt_tol=1e-4, col_moments=vt
            )
            beta = fit.coef
            pred = Xv @ beta
            errors[fi, gi] = float(np.mean((yv - pred) ** 2))
    mean_err = errors.mean(axis=0)
    se_err = errors.std(axis=0, ddof=1) / np.sqrt(folds)
    idx_min, idx_1se = _pick_lambda(full, mean_err, se_err, support_cap)
    curve = CvCurve(grid, mean_err, se_err, idx_min, idx_1se)
    chosen = idx_1se if one_se else idx_min
    return full[chosen], curve


# ---------------------------------------------------------------------------
# L1 logistic regression


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_l1_fit(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    *,
    beta0: np.ndarray | None = None,
    intercept0: float | None = None,
    tol: float = 1e-8,
    kkt_tol: float = 1e-5,
    max_outer: int = 200,
    max_sweeps: int = 100_000,
) -> SparseFit:
    """L1-penalized logistic loss via IRLS with a weighted CD inner loop.

    Objective: mean logistic deviance/2... specifically
    (1/n) * sum log(1 + exp(-s_i eta_i)) + lam*||b||_1 with an unpenalized
    intercept. KKT on the true gradient is checked to kkt_tol.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise DataError("labels must be 0/1")
    if len(classes) < 2:
        raise DataError("single-class target: logistic fit is undefined")
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=np.float64)
    pbar = float(y.mean())
    b = float(np.log(pbar / (1 - pbar))) if intercept0 is None else float(intercept0)
    sweeps = 0
    inner_tol = tol
    for _ in range(max_outer):
        eta = X @ beta + b
        prob = _sigmoid(eta)
        w = np.clip(prob * (1 - prob), 1e-5, None)
        z = eta + (y - prob) / w
        beta_prev = beta.copy()
        b_prev = b
        beta, b, used = _weighted_cd(X, z, w, lam, beta, b, inner_tol, max_sweeps - sweeps)
        sweeps += used
        if sweeps >= max_sweeps:
            # the budget is spent; the KKT criterion still decides the verdict
            fit = _finish_logistic(X, y, beta, b, lam, sweeps, converged=False)
            if fit.kkt_residual <= kkt_tol:
                fit.converged = True
                return fit
            raise ConvergenceError(
                f"logistic lasso did not converge in {max_sweeps} sweeps "
                f"(kkt residual {fit.kkt_residual:.3g})",
                fit=fit,
            )
        delta = max(float(np.max(np.abs(beta - beta_prev), initial=0.0)), abs(b - b_prev))
        if delta < 1e-9:
            fit = _finish_logistic(X, y, beta, b, lam, sweeps, converged=True)
            if fit.kkt_residual <= kkt_tol:
                return fit
            if inner_tol <= 1e-15:
                break
            # IRLS fixed point but inner loop too loose for the KKT check
            inner_tol = max(inner_tol * 1e-2, 1e-16)
    fit = _finish_logistic(X, y, beta, b, lam, sweeps, converged=False)
    if fit.kkt_residual <= kkt_tol:
        fit.converged = True
        return fit
    raise ConvergenceError(
        f"logistic lasso stalled after {max_outer} outer rounds "
        f"(kkt residual {fit.kkt_residual:.3g})",
        fit=fit,
    )


def _weighted_cd(X, z, w, lam, beta, b, tol, sweep_budget):
    """Penalized weighted least squares by coordinate descent."""
    n, p = X.shape
    wsum = float(w.sum())
    r = z - X @ beta - b
    active = list(np.flatnonzero(beta))
    # curvatures are loop-invariant for fixed w; fill on first touch
    vw = np.full(p, np.nan)
    sweeps = 0
    while sweeps < max(sweep_budget, 1):
        max_delta = 0.0
        # intercept update is unpenalized
        db = float((w @ r) / wsum)
        if db != 0.0:
            b += db
            r -= db
            max_delta = abs(db)
        for j in active:
            xj = X[:, j]
            vj = vw[j]
            if np.isnan(vj):
                vj = vw[j] = float((w * xj) @ xj) / n
            if vj <= 0.0:
                continue
            bj = beta[j]
            zj = bj * vj + float((w * xj) @ r) / n
            nb = _soft(zj, lam) / vj
            if nb != bj:
                r -= (nb - bj) * xj
                beta[j] = nb
                d = abs(nb - bj)
                if d > max_delta:
                    max_delta = d
        sweeps += 1
        if sweeps % 100 == 0:
            # incremental residual updates drift over long runs; resync
            r = z - X @ beta - b
        if max_delta < tol:
            r = z - X @ beta - b
            g = (X.T @ (w * r)) / n
            violators = [j for j in np.flatnonzero(np.abs(g) > lam * (1 + 1e-12) + 1e-15) if j not in set(active)]
            if not violators:
                break
            active.extend(violators)
    return beta, b, sweeps


def _finish_logistic(X, y, beta, b, lam, sweeps, converged) -> SparseFit:
    n = X.shape[0]
    g = X.T @ (_sigmoid(X @ beta + b) - y) / n
    resid = _kkt_residual_logistic(g, beta, lam)
    return SparseFit(
        coef=beta.copy(),
        intercept=float(b),
        lam=float(lam),
        n_iter=sweeps,
        kkt_residual=float(resid),
        converged=converged,
    )


def _kkt_residual_logistic(g: np.ndarray, beta: np.ndarray, lam: float) -> float:
    nz = beta != 0
    resid = 0.0
    if nz.any():
        resid = float(np.max(np.abs(g[nz] + lam * np.sign(beta[nz]))))
    if (~nz).any():
        slack = float(np.max(np.abs(g[~nz]))) - lam
        if slack > resid:
            resid = slack
    return max(resid, 0.0)


def logistic_lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    n = X.shape[0]
    pbar = float(y.mean())
    g = X.T @ (pbar - y) / n
    return float(np.max(np.abs(g))) if X.size else 0.0


def logistic_path(
    X: np.ndarray,
    y: np.ndarray,
    k: int = 100,
    *,
    min_ratio: float = 1e-3,
    support_cap: int | None = None,
    tol: float = 1e-8,
    kkt_tol: float = 1e-5,
) -> list[SparseFit]:
    X = np.asfortranarray(X, dtype=np.float64)
    lmax = logistic_lambda_max(X, y)
    grid = lambda_grid(lmax, k, min_ratio)
    fits: list[SparseFit] = []
    beta = None
    b = None
    for lam in grid:
        try:
            fit = logistic_l1_fit(
                X, y, float(lam), beta0=beta, intercept0=b, tol=tol, kkt_tol=kkt_tol
            )
        except ConvergenceError as err:
            if err.fit is None:
                raise
            # near-separable data stalls at small lambda and smaller lambdas
            # only get worse; the path ends here with the best iterate as a
            # non-converged marker that lambda selection skips
            fits.append(err.fit)
            break
        fits.append(fit)
        beta, b = fit.coef, fit.intercept
        if support_cap is not None and len(fit.support) > support_cap:
            break
    return fits


def logistic_cv(
    X: np.ndarray,
    y: np.ndarray,
    *,
    seed: int = 0,
    k: int = 100,
    folds: int = 5,
    min_ratio: float = 1e-3,
    support_cap: int | None = None,
    one_se: bool = True,
) -> tuple[SparseFit, CvCurve]:
    """K-fold CV on validation deviance; picks the 1-SE lambda by default.

    Fold fits run at a slightly looser stationarity tolerance: they only
    feed the error curve, while the returned fit comes from the full path.
    """
    X = np.asfortranarray(X, dtype=np.float64)
    n = X.shape[0]
    folds = min(folds, n)
    if folds < 2:
        raise DataError("cross-validation needs at least 2 folds")
    full = logistic_path(X, y, k, min_ratio=min_ratio, support_cap=support_cap)
    grid = np.array([f.lam for f in full])
    errors = np.full((folds, len(grid)), np.nan)
    for fi, val_idx in enumerate(_kfold(n, folds, seed)):
        mask = np.ones(n, dtype=bool)
        mask[val_idx] = False
        yt = y[mask]
        if len(np.unique(yt)) < 2:
            raise DataError("a CV fold lost one class; need more rows per class")
        Xt = np.asfortranarray(X[mask])
        Xv, yv = X[val_idx], y[val_idx]
        beta = None
        b = None
        for gi, lam in enumerate(grid):
            try:
                fit = logistic_l1_fit(
                    Xt, yt, float(lam), beta0=beta, intercept0=b, tol=1e-7, kkt_tol=1e-4
                )
            except ConvergenceError:
                # this fold hit separation territory; its walk ends here and
                # the curve is truncated to the prefix every fold evaluated
                break
            beta, b = fit.coef, fit.intercept
            prob = np.clip(_sigmoid(Xv @ beta + b), 1e-12, 1 - 1e-12)
            errors[fi, gi] = float(-np.mean(yv * np.log(prob) + (1 - yv) * np.log(1 - prob)))
    evaluated = ~np.isnan(errors).any(axis=0)
    if not evaluated.all():
        stop = int(np.argmin(evaluated))
        if stop == 0:
            raise ConvergenceError("every CV fold stalled at the largest lambda")
        full = full[:stop]
        grid = grid[:stop]
        errors = errors[:, :stop]
    mean_err = errors.mean(axis=0)
    se_err = errors.std(axis=0, ddof=1) / np.sqrt(folds)
    idx_min, idx_1se = _pick_lambda(full, mean_err, se_err, support_cap)
    curve = CvCurve(grid, mean_err, se_err, idx_min, idx_1se)
    chosen = idx_1se if one_se else idx_min
    return full[chosen], curve


# ---------------------------------------------------------------------------
# dense estimators


def ridge_fit(X: np.ndarray, y: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    """Minimize ||y - Xb - c||^2 + alpha*||b||^2; returns (coef, intercept)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    xm = X.mean(axis=0)
    ym = float(y.mean())
    Xc = X - xm
    yc = y - ym
    A = Xc.T @ Xc + alpha * np.eye(p)
    b = Xc.T @ yc
    try:
        coef = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    return coef, ym - float(xm @ coef)


def logistic_ridge_fit(
    X: np.ndarray,
    y: np.ndarray,
    alpha: float,
    *,
    max_iter: int = 100,
    tol: float = 1e-10,
) -> tuple[np.ndarray, float]:
    """L2-regularized logistic fit by Newton iterations (intercept free)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    theta = np.zeros(p + 1)
    pen = np.full(p + 1, alpha)
    pen[-1] = 0.0
    for _ in range(max_iter):
        eta = Xa @ theta
        prob = _sigmoid(eta)
        w = np.clip(prob * (1 - prob), 1e-10, None)
        g = Xa.T @ (prob - y) / n + pen * theta / n
        H = (Xa * w[:, None]).T @ Xa / n + np.diag(pen) / n
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(H, g, rcond=None)
        theta = theta - step
        if float(np.max(np.abs(step))) < tol:
            break
    return theta[:p], float(theta[p])


def r2_score(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise DataError("r2_score needs equal-length vectors")
    if y_true.size < 2:
        raise DataError("r2_score needs at least two points")
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        raise DataError("r2_score is undefined for a constant target")
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    return 1.0 - ss_res / ss_tot
