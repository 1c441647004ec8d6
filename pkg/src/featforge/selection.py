"""Multi-stage sparse feature selection over a synthesized pool.

Stages, in order: a correlation pre-filter over the pool (candidates are
scanned in (complexity, canonical key) order and dropped when correlated
beyond the threshold with an already-kept feature; original columns are
never dropped), a redundancy pre-filter (dropping candidates that the span
of kept simpler features over the same variables linearly reconstructs),
then per-subsample runs of chunked L1 fits followed by a noise-calibrated
filter, then a vote-weighted union, a second correlation filter, and one
final cross-validated L1 fit whose support is the result.

Lambda policy: the candidate-gathering fits inside chunked_select use the
smallest lambda whose support stays under n/2 (liberal, recall-oriented;
supports past the cap are unstable); fits whose support is read as evidence
(noise filter, final fit) pick lambda by k-fold cross-validation with the
one-standard-error rule, which keeps pure-noise targets empty while
preserving planted signals.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ConvergenceError, DataError
from .sparse import (
    lambda_grid,
    lambda_max,
    lasso_cv,
    lasso_fit,
    lasso_path,
    logistic_cv,
    logistic_l1_fit,
    logistic_lambda_max,
    logistic_path,
    standardize,
)
from .synthesis import FeaturePool


@dataclass(frozen=True)
class SelectionConfig:
    """Cascade knobs. None for the count fields means the per-call formula:
    noise_count -> max(3, d // 2) per noise mode, initial_set_size ->
    min(n // 10, 50)."""

    correlation_threshold: float = 0.95
    redundancy_threshold: float = 0.99
    noise_count: int | None = None
    noise_modes: tuple[str, ...] = ("shuffled", "gaussian")
    initial_set_size: int | None = None
    subsample_runs: int = 5
    subsample_fraction: float = 0.8
    seed: int = 0
    cv_folds: int = 5
    lambda_grid: int = 100
    lambda_min_ratio: float = 1e-3
    max_pairwise_corr_features: int = 30_000

    def __post_init__(self):
        if not 0 < self.correlation_threshold <= 1:
            raise ValueError("correlation_threshold must be in (0, 1]")
        if not 0 < self.redundancy_threshold <= 1:
            raise ValueError("redundancy_threshold must be in (0, 1]")
        if not 0 < self.subsample_fraction <= 1:
            raise ValueError("subsample_fraction must be in (0, 1]")
        if self.subsample_runs < 1:
            raise ValueError("subsample_runs must be positive")
        for m in self.noise_modes:
            if m not in ("shuffled", "gaussian"):
                raise ValueError(f"unknown noise mode {m!r}")


@dataclass
class SelectionResult:
    """Outcome of the cascade, indices relative to the input pool."""

    selected_indices: tuple[int, ...]
    selected_keys: tuple[str, ...]
    coef: np.ndarray
    votes: dict[str, int]
    provenance: dict[str, tuple[str, ...]]
    empty: bool
    task: str


def infer_task(y: np.ndarray) -> str:
    vals = np.unique(y[np.isfinite(y)])
    if len(vals) == 2 and np.all(np.isin(vals, (0.0, 1.0))):
        return "classification"
    return "regression"


# ---------------------------------------------------------------------------
# correlation filter


def _greedy_corr_keep(
    Z: np.ndarray,
    order: np.ndarray,
    protected: np.ndarray,
    threshold: float,
    block: int = 256,
) -> np.ndarray:
    """Greedy scan in `order`; drop candidates correlated beyond threshold
    with anything already kept. Returns kept indices sorted ascending."""
    n = Z.shape[0]
    kept: list[int] = []
    kept_cols: list[np.ndarray] = []
    for lo in range(0, len(order), block):
        blk = order[lo : lo + block]
        B = Z[:, blk]
        R_prev = (np.column_stack(kept_cols).T @ B) / n if kept_cols else None
        R_blk = (B.T @ B) / n
        local_kept: list[int] = []
        for bi, idx in enumerate(blk):
            if protected[idx]:
                kept.append(int(idx))
                kept_cols.append(Z[:, idx])
                local_kept.append(bi)
                continue
            worst = 0.0
            if R_prev is not None and R_prev.shape[0]:
                worst = float(np.max(np.abs(R_prev[:, bi])))
            if worst <= threshold and local_kept:
                worst = max(worst, float(np.max(np.abs(R_blk[local_kept, bi]))))
            if worst > threshold:
                continue
            kept.append(int(idx))
            kept_cols.append(Z[:, idx])
            local_kept.append(bi)
    return np.sort(np.array(kept, dtype=np.int64))


def _corr_vs_block_keep(
    Z: np.ndarray,
    candidates: np.ndarray,
    reference: np.ndarray,
    threshold: float,
) -> np.ndarray:
    """Drop candidates correlated beyond threshold with any reference column."""
    n = Z.shape[0]
    R = (Z[:, reference].T @ Z[:, candidates]) / n
    bad = np.max(np.abs(R), axis=0) > threshold
    return candidates[~bad]


def _span_redundancy_keep(
    Z: np.ndarray,
    order: np.ndarray,
    protected: np.ndarray,
    var_sets: list[frozenset],
    threshold: float,
) -> np.ndarray:
    """Drop candidates the kept simpler features jointly reconstruct.

    Pairwise correlation misses sums and differences: f + g correlates with
    neither part strongly, yet adds nothing a linear model could not build
    from f and g directly, and such recombinations soak up L1 credit that
    belongs to their parts. A candidate is checked against the span of all
    kept features whose variable sets are subsets of its own; when the
    least-squares reconstruction reaches `threshold` in multiple correlation
    the candidate is dropped. Genuine interactions (products, ratios) stay
    well below the threshold. Scan in complexity order so parts are seen
    before recombinations.
    """
    n = Z.shape[0]
    kept: list[int] = []
    by_vars: dict[frozenset, list[int]] = {}
    qcache: dict[frozenset, tuple[int, np.ndarray]] = {}
    for idx in order:
        i = int(idx)
        vs = var_sets[i]
        if protected[i]:
            kept.append(i)
            by_vars.setdefault(vs, []).append(i)
            continue
        names = sorted(vs)
        span: list[int] = []
        for r in range(1, len(names) + 1):
            for sub in combinations(names, r):
                span.extend(by_vars.get(frozenset(sub), ()))
        # an overparameterized span reconstructs anything; keep it honest
        span = tuple(sorted(span)[: n // 2])
        if span:
            cached = qcache.get(vs)
            if cached is None or cached[0] != span:
                Q = np.linalg.qr(Z[:, list(span)], mode="reduced")[0]
                qcache[vs] = (span, Q)
            else:
                Q = cached[1]
            c = Z[:, i]
            proj = Q.T @ c
            r2 = float(proj @ proj) / float(c @ c)
            if np.sqrt(min(max(r2, 0.0), 1.0)) > threshold:
                continue
        kept.append(i)
        by_vars.setdefault(vs, []).append(i)
    return np.sort(np.array(kept, dtype=np.int64))


def _canonical_order(pool: FeaturePool) -> np.ndarray:
    keyed = sorted(range(len(pool)), key=lambda i: (pool.entries[i].complexity, pool.entries[i].key))
    return np.array(keyed, dtype=np.int64)


def correlation_filter(pool: FeaturePool, threshold: float = 0.95) -> FeaturePool:
    """Drop pool features |r| > threshold against a kept feature; originals
    are never dropped; candidates scanned in (complexity, key) order."""
    if len(pool) == 0:
        return pool
    Z, _ = standardize(pool.matrix())
    protected = np.zeros(len(pool), dtype=bool)
    protected[: pool.n_original] = True
    kept = _greedy_corr_keep(Z, _canonical_order(pool), protected, threshold)
    return pool.subset(kept)


def redundancy_filter(pool: FeaturePool, threshold: float = 0.99) -> FeaturePool:
    """Drop pool features that kept simpler features linearly reconstruct
    beyond `threshold` in multiple correlation; see _span_redundancy_keep."""
    if len(pool) == 0:
        return pool
    Z, _ = standardize(pool.matrix())
    protected = np.zeros(len(pool), dtype=bool)
    protected[: pool.n_original] = True
    var_sets = [frozenset(e.expr.columns()) for e in pool.entries]
    kept = _span_redundancy_keep(Z, _canonical_order(pool), protected, var_sets, threshold)
    return pool.subset(kept)


# ---------------------------------------------------------------------------
# noise-calibrated filter


def noise_filter(
    X: np.ndarray,
    y: np.ndarray,
    cfg: SelectionConfig,
    *,
    task: str = "regression",
    seed: int = 0,
) -> np.ndarray:
    """Keep columns whose |coefficient| strictly beats every noise column.

    Noise columns are shuffled copies of real columns plus gaussian draws,
    max(3, d // 2) of each mode by default. The calibration fit picks its
    lambda by cross-validation with the 1-SE rule. Ties go to the noise:
    a real feature must strictly exceed the largest noise coefficient.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < 10:
        raise DataError(f"noise filter needs at least 10 rows, got {n}")
    if d == 0:
        return np.array([], dtype=np.int64)
    k = cfg.noise_count if cfg.noise_count is not None else max(3, d // 2)
    rng = np.random.default_rng(seed)
    blocks = [X]
    for mode in cfg.noise_modes:
        if mode == "shuffled":
            src = rng.integers(0, d, size=k)
            cols = [X[rng.permutation(n), j] for j in src]
            blocks.append(np.column_stack(cols))
        else:
            blocks.append(rng.standard_normal((n, k)))
    Xa = np.hstack(blocks)
    Z, _ = standardize(Xa)
    fit = _cv_fit(Z, y, cfg, task=task, seed=seed, cap=n // 2)
    real = np.abs(fit.coef[:d])
    noise = np.abs(fit.coef[d:])
    floor = float(noise.max()) if noise.size else 0.0
    return np.flatnonzero(real > floor)


def _center(y: np.ndarray, task: str) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return y if task == "classification" else y - y.mean()


def _cv_fit(Z, y, cfg, *, task, seed, cap, one_se=True):
    """Cross-validated fit under the support-cap guard.

    Evidence fits (noise calibration, final model) keep the 1-SE rule;
    gathering fits pass one_se=False because recall matters there and the
    shaved-off weak-but-real signal never gets a second chance downstream.
    """
    yc = _center(y, task)
    cv = logistic_cv if task == "classification" else lasso_cv
    fit, _ = cv(
        Z, yc, seed=seed, k=cfg.lambda_grid, folds=cfg.cv_folds,
        min_ratio=cfg.lambda_min_ratio, support_cap=cap, one_se=one_se,
    )
    return fit


def _support_rule_fit(Z, y, cfg, *, task, cap):
    """Smallest-lambda fit on the grid whose support stays within cap.

    Gathering fits tolerate a looser stationarity target than evidence fits;
    their supports get unioned and refit downstream. When the matrix has at
    most cap columns every grid point satisfies the rule, so the walk would
    always end at the last point: fit straight to lambda_min through a short
    warm-up path instead of stepping through the whole grid.
    """
    yc = _center(y, task)
    if Z.shape[1] <= cap:
        Zf = np.asfortranarray(Z, dtype=np.float64)
        if task == "classification":
            lmax = logistic_lambda_max(Zf, yc)
        else:
            lmax = lambda_max(Zf, yc)
        grid = lambda_grid(lmax, cfg.lambda_grid, cfg.lambda_min_ratio)
        warmup = np.geomspace(grid[0], grid[-1], 5) if grid[0] > 0 else grid[-1:]
        if task == "classification":
            fit = None
            for lam in warmup:
                fit = logistic_l1_fit(
                    Zf, yc, float(lam),
                    beta0=None if fit is None else fit.coef,
                    intercept0=None if fit is None else fit.intercept,
                    tol=1e-7, kkt_tol=1e-5,
                )
        else:
            v = np.einsum("ij,ij->j", Zf, Zf) / max(Zf.shape[0], 1)
            beta = None
            for lam in warmup:
                fit = lasso_fit(
                    Zf, yc, float(lam),
                    beta0=beta, tol=1e-7, kkt_tol=1e-5, col_moments=v,
                )
                beta = fit.coef
        return fit
    path_fn = logistic_path if task == "classification" else lasso_path
    path = path_fn(
        Z, yc, cfg.lambda_grid, min_ratio=cfg.lambda_min_ratio,
        support_cap=cap, tol=1e-7, kkt_tol=1e-5,
    )
    best = path[0]
    for f in path:
        if len(f.support) <= cap:
            best = f
        else:
            break
    return best


# ---------------------------------------------------------------------------
# chunked L1 screening


def chunked_select(
    X: np.ndarray,
    y: np.ndarray,
    cfg: SelectionConfig,
    *,
    task: str = "regression",
) -> np.ndarray:
    """L1 screening that never fits more than ~n/2 columns at once.

    A first capped fit ranks features; the largest-coefficient ones form the
    initial set, the rest are partitioned into near-equal chunks sized so
    each chunk-plus-initial fit stays under n/2 columns. Nonzero features
    from every chunk fit are unioned with the initial set and refit once;
    the support of that refit is returned (indices into X's columns).
    """
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if n < 20:
        raise DataError(f"chunked selection needs at least 20 rows, got {n}")
    if p == 0:
        return np.array([], dtype=np.int64)
    Z, _ = standardize(X)
    cap = n // 2
    init_size = cfg.initial_set_size if cfg.initial_set_size is not None else min(n // 10, 50)
    init_size = max(1, min(init_size, cap - 2))
    fit0 = _support_rule_fit(Z, y, cfg, task=task, cap=cap)
    ranked = np.argsort(-np.abs(fit0.coef), kind="stable")
    initial = np.sort(ranked[: min(init_size, len(fit0.support))])
    rest = np.setdiff1d(np.arange(p), initial)
    max_chunk = max(cap - len(initial) - 1, 1)
    if len(rest) == 0:
        chunks = []
    else:
        n_chunks = int(np.ceil(len(rest) / max_chunk))
        chunks = np.array_split(rest, n_chunks)
    if len(chunks) <= 1:
        # with one chunk the union refit is the same full-matrix fit again
        return fit0.support
    collected: set[int] = set(int(i) for i in initial)
    for chunk in chunks:
        cols = np.sort(np.concatenate([chunk, initial])) if len(initial) else chunk
        fit = _support_rule_fit(Z[:, cols], y, cfg, task=task, cap=cap)
        for j in fit.support:
            collected.add(int(cols[j]))
    union = np.array(sorted(collected), dtype=np.int64)
    if len(union) == 0:
        return union
    return _refit_support(Z, y, cfg, task, union, cap)


def _refit_support(Z, y, cfg, task, cols, cap) -> np.ndarray:
    fit = _support_rule_fit(Z[:, cols], y, cfg, task=task, cap=cap)
    return cols[fit.support]


# ---------------------------------------------------------------------------
# full cascade


def select_features(
    pool: FeaturePool,
    y: np.ndarray,
    cfg: SelectionConfig | None = None,
    *,
    task: str | None = None,
    threads: int = 1,
) -> SelectionResult:
    """Run the full cascade; see the module docstring for the stage order."""
    cfg = cfg or SelectionConfig()
    y = np.asarray(y, dtype=np.float64)
    p = len(pool)
    X = pool.matrix()
    n = X.shape[0]
    if y.shape != (n,):
        raise DataError(f"target has shape {y.shape}, expected ({n},)")
    if not np.isfinite(y).all():
        raise DataError("target contains non-finite values")
    if task is None:
        task = infer_task(y)
    events: dict[int, list[str]] = {i: [] for i in range(p)}
    order = _canonical_order(pool)
    protected = np.zeros(p, dtype=bool)
    protected[: pool.n_original] = True
    Z, _ = standardize(X)

    # stage 0: correlation pre-filter over the pool
    if p <= cfg.max_pairwise_corr_features:
        keep0 = _greedy_corr_keep(Z, order, protected, cfg.correlation_threshold)
        stage0 = "correlation_prefilter"
    else:
        cand = order[~protected[order]]
        originals = np.flatnonzero(protected)
        kept_c = _corr_vs_block_keep(Z, cand, originals, cfg.correlation_threshold)
        keep0 = np.sort(np.concatenate([originals, kept_c]))
        stage0 = "correlation_prefilter(originals-only)"
    keep0_set = set(int(i) for i in keep0)
    for i in range(p):
        if i in keep0_set:
            events[i].append(f"{stage0}: kept")
        else:
            events[i].append(f"{stage0}: dropped |r|>{cfg.correlation_threshold}")

    # stage 0b: drop features the simpler survivors linearly reconstruct
    var_sets = [frozenset(e.expr.columns()) for e in pool.entries]
    order0 = np.array([i for i in order if int(i) in keep0_set], dtype=np.int64)
    keep0 = _span_redundancy_keep(Z, order0, protected, var_sets, cfg.redundancy_threshold)
    kept_set = set(int(i) for i in keep0)
    for i in keep0_set:
        if i in kept_set:
            events[i].append("redundancy_prefilter: kept")
        else:
            events[i].append(f"redundancy_prefilter: dropped span-R>{cfg.redundancy_threshold}")

    # canonical internal ordering of survivors
    keep0 = np.array(
        sorted(keep0, key=lambda i: (pool.entries[int(i)].complexity, pool.entries[int(i)].key)),
        dtype=np.int64,
    )

    def one_run(run: int) -> np.ndarray:
        seed_r = cfg.seed + run
        rng = np.random.default_rng(seed_r)
        if cfg.subsample_fraction < 1.0:
            m = max(int(round(n * cfg.subsample_fraction)), 1)
            rows = np.sort(rng.choice(n, size=m, replace=False))
        else:
            rows = np.arange(n)
        Xr = X[rows][:, keep0]
        yr = y[rows]
        cand = chunked_select(Xr, yr, cfg, task=task)
        if len(cand) == 0:
            return np.array([], dtype=np.int64)
        kept = noise_filter(Xr[:, cand], yr, cfg, task=task, seed=seed_r)
        return keep0[cand[kept]]

    runs = range(cfg.subsample_runs)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            run_sets = list(ex.map(one_run, runs))
    else:
        run_sets = [one_run(r) for r in runs]

    votes = np.zeros(p, dtype=np.int64)
    for r, sel in enumerate(run_sets):
        for i in sel:
            votes[i] += 1
            events[int(i)].append(f"run{r}: survived chunked fit + noise filter")

    union = np.flatnonzero(votes)
    # vote-weighted union filter: more votes win, then lower complexity
    if len(union):
        uorder = np.array(
            sorted(
                union,
                key=lambda i: (-votes[int(i)], pool.entries[int(i)].complexity, pool.entries[int(i)].key),
            ),
            dtype=np.int64,
        )
        survivors = _greedy_corr_keep(Z, uorder, protected, cfg.correlation_threshold)
        surv_set = set(int(j) for j in survivors)
        for i in union:
            action = "kept" if int(i) in surv_set else "dropped"
            events[int(i)].append(f"union_correlation_filter: {action}")
    else:
        survivors = union

    if len(survivors) == 0:
        return SelectionResult(
            selected_indices=(),
            selected_keys=(),
            coef=np.zeros(0),
            votes={},
            provenance={pool.entries[i].key: tuple(ev) for i, ev in events.items() if ev},
            empty=True,
            task=task,
        )

    fit = _cv_fit(Z[:, survivors], y, cfg, task=task, seed=cfg.seed, cap=n // 2)
    sel_local = fit.support
    sel_pool = survivors[sel_local]
    coefs = fit.coef[sel_local]
    order_final = sorted(
        range(len(sel_pool)),
        key=lambda t: (-abs(float(coefs[t])), pool.entries[int(sel_pool[t])].key),
    )
    sel_pool = sel_pool[order_final]
    coefs = coefs[order_final]
    for i, c in zip(sel_pool, coefs):
        events[int(i)].append(f"final_l1: selected coef={c:.6g}")

    return SelectionResult(
        selected_indices=tuple(int(i) for i in sel_pool),
        selected_keys=tuple(pool.entries[int(i)].key for i in sel_pool),
        coef=coefs,
        votes={pool.entries[int(i)].key: int(votes[i]) for i in union},
        provenance={pool.entries[i].key: tuple(ev) for i, ev in events.items() if ev},
        empty=len(sel_pool) == 0,
        task=task,
    )
