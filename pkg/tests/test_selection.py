"""Selection cascade: filters, noise calibration, invariants."""

from dataclasses import replace

import numpy as np
import pytest

from featforge.dimensions import Dimension
from featforge.errors import DataError
from featforge.expr import parse_key
from featforge.selection import (
    SelectionConfig,
    correlation_filter,
    infer_task,
    noise_filter,
    redundancy_filter,
    select_features,
)
from featforge.synthesis import EngineeringConfig, FeaturePool, PoolEntry, engineer

from conftest import planted_dataset


def planted_pool(seed=0, n=300, distractors=4, steps=2):
    ds = planted_dataset(seed, n=n, distractors=distractors)
    pool = engineer(ds.columns, ds.kinds, ds.units, EngineeringConfig(steps=steps), seed=seed)
    return pool, ds.y


def test_config_validation():
    with pytest.raises(ValueError):
        SelectionConfig(correlation_threshold=0.0)
    with pytest.raises(ValueError):
        SelectionConfig(redundancy_threshold=1.5)
    with pytest.raises(ValueError):
        SelectionConfig(subsample_fraction=0.0)
    with pytest.raises(ValueError):
        SelectionConfig(subsample_runs=0)
    with pytest.raises(ValueError):
        SelectionConfig(noise_modes=("shuffled", "pink"))


def test_infer_task():
    assert infer_task(np.array([0.0, 1.0, 0.0, 1.0])) == "classification"
    assert infer_task(np.array([0.0, 1.0, 2.0])) == "regression"
    assert infer_task(np.array([1.5, 2.5, 1.5])) == "regression"


# ---------------------------------------------------------------------------
# filters


def test_correlation_filter_drops_near_copies():
    ds = planted_dataset(0, n=200, distractors=2)
    pool = engineer(ds.columns, ds.kinds, ds.units, EngineeringConfig(steps=1), seed=0)
    filtered = correlation_filter(pool, threshold=0.95)
    assert len(filtered) < len(pool)
    # originals are protected even when mutually correlated
    assert all(k in filtered.keys for k in pool.keys[: pool.n_original])
    # engineered survivors are pairwise below the threshold
    Z = filtered.matrix()
    std = Z.std(0)
    Z = (Z - Z.mean(0)) / np.where(std < 1e-12, 1.0, std)
    C = np.abs(Z.T @ Z / Z.shape[0])
    off = C[filtered.n_original :, filtered.n_original :].copy()
    np.fill_diagonal(off, 0.0)
    assert off.max() <= 0.95 + 1e-9


def test_redundancy_filter_drops_sum_keeps_product():
    rng = np.random.default_rng(7)
    n = 200
    a = rng.standard_normal(n)
    b = rng.standard_normal(n)
    columns = {"a": a, "b": b}
    kinds = {"a": "numeric", "b": "numeric"}
    units = {"a": None, "b": None}
    pool = engineer(columns, kinds, units, EngineeringConfig(steps=1), seed=0)
    dl = Dimension()
    extra = [
        PoolEntry(expr=parse_key("add(c:a,c:b)"), dim=dl, column=a + b),
        PoolEntry(expr=parse_key("mul(c:a,c:b)"), dim=dl, column=a * b),
    ]
    widened = FeaturePool(
        entries=pool.entries + extra,
        n_original=pool.n_original,
        row_indices=pool.row_indices,
        report=pool.report,
    )

    after_corr = correlation_filter(widened, threshold=0.95)
    keys = set(after_corr.keys)
    # pairwise correlation cannot see the sum: corr(a+b, a) is about 0.7
    assert "add(c:a,c:b)" in keys and "mul(c:a,c:b)" in keys

    after_span = redundancy_filter(after_corr, threshold=0.99)
    keys = set(after_span.keys)
    assert "add(c:a,c:b)" not in keys, "exact sum of kept parts must be span-redundant"
    assert "mul(c:a,c:b)" in keys, "a genuine interaction is not in the parts' span"
    assert "c:a" in keys and "c:b" in keys


def test_noise_filter_keeps_signal_drops_noise():
    rng = np.random.default_rng(5)
    n, d = 250, 8
    X = rng.standard_normal((n, d))
    y = 2.0 * X[:, 0] - 1.5 * X[:, 3] + 0.05 * rng.standard_normal(n)
    kept = noise_filter(X, y, SelectionConfig(), seed=1)
    assert 0 in kept and 3 in kept
    assert len(kept) <= 4


def test_noise_filter_empty_on_pure_noise():
    rng = np.random.default_rng(6)
    n, d = 250, 8
    X = rng.standard_normal((n, d))
    y = rng.standard_normal(n)
    kept = noise_filter(X, y, SelectionConfig(), seed=2)
    assert len(kept) == 0


def test_noise_filter_needs_rows():
    with pytest.raises(DataError):
        noise_filter(np.ones((5, 2)), np.ones(5), SelectionConfig(), seed=0)


# ---------------------------------------------------------------------------
# full cascade


@pytest.fixture(scope="module")
def planted_selection():
    pool, y = planted_pool(seed=0)
    return pool, y, select_features(pool, y, SelectionConfig(seed=0))


def test_select_features_recovers_planted_signal(planted_selection):
    pool, y, result = planted_selection
    assert {"c:x1", "recip(c:x2)"} <= set(result.selected_keys)
    assert not result.empty
    assert len(result.selected_keys) <= len(y) // 2
    assert len(result.coef) == len(result.selected_keys)
    assert result.task == "regression"


def test_selection_result_ordered_by_coefficient(planted_selection):
    _, _, result = planted_selection
    mags = np.abs(result.coef)
    assert all(mags[i] >= mags[i + 1] for i in range(len(mags) - 1))


def test_provenance_names_admitting_stages(planted_selection):
    _, _, result = planted_selection
    for key in result.selected_keys:
        trail = result.provenance[key]
        assert trail, f"no provenance for {key}"
        assert any(step.startswith("final_l1: selected") for step in trail)
        assert any("correlation_prefilter" in step for step in trail)
    # votes cover exactly the union that reached the vote stage
    for key in result.selected_keys:
        assert result.votes.get(key, 0) >= 1


def test_selected_size_capped_by_half_n():
    pool, y = planted_pool(seed=3, n=60, distractors=2, steps=1)
    result = select_features(pool, y, SelectionConfig(seed=3))
    assert len(result.selected_keys) <= 30


def test_selection_invariant_to_pool_column_order():
    pool, y = planted_pool(seed=2, distractors=3)
    result = select_features(pool, y, SelectionConfig(seed=7))

    # permute only the engineered block; originals stay in front as the
    # protected prefix the pool contract requires
    rng = np.random.default_rng(123)
    eng = list(range(pool.n_original, len(pool)))
    rng.shuffle(eng)
    perm_pool = pool.subset(list(range(pool.n_original)) + eng)
    result_perm = select_features(perm_pool, y, SelectionConfig(seed=7))
    assert set(result.selected_keys) == set(result_perm.selected_keys)


def test_selection_invariant_to_positive_column_scaling():
    pool, y = planted_pool(seed=4, distractors=3)
    result = select_features(pool, y, SelectionConfig(seed=11))

    rng = np.random.default_rng(99)
    scaled = pool.subset(list(range(len(pool))))
    scaled.entries = [
        replace(e, column=e.column * float(rng.uniform(0.1, 10.0))) for e in scaled.entries
    ]
    result_scaled = select_features(scaled, y, SelectionConfig(seed=11))
    assert set(result.selected_keys) == set(result_scaled.selected_keys)


def test_selection_deterministic_across_threads():
    pool, y = planted_pool(seed=5, distractors=3)
    r1 = select_features(pool, y, SelectionConfig(seed=13), threads=1)
    r8 = select_features(pool, y, SelectionConfig(seed=13), threads=8)
    assert r1.selected_keys == r8.selected_keys
    assert np.array_equal(r1.coef, r8.coef)
    assert r1.votes == r8.votes


def test_select_features_validates_target():
    pool, y = planted_pool(seed=6, distractors=2, steps=1)
    with pytest.raises(DataError):
        select_features(pool, y[:-1], SelectionConfig())
    bad = y.copy()
    bad[0] = np.nan
    with pytest.raises(DataError):
        select_features(pool, bad, SelectionConfig())


def test_classification_task_routing():
    rng = np.random.default_rng(8)
    n = 160
    columns = {f"x{i}": rng.uniform(0.5, 3.0, n) for i in range(1, 5)}
    score = 2.5 * np.log(columns["x1"]) - 2.0 * np.log(columns["x2"])
    y = (score + 0.3 * rng.standard_normal(n) > 0).astype(np.float64)
    pool = engineer(
        columns,
        {c: "numeric" for c in columns},
        {c: None for c in columns},
        EngineeringConfig(steps=1),
        seed=0,
    )
    # small grid: this checks routing and the logistic plumbing, not recovery
    cfg = SelectionConfig(seed=1, lambda_grid=25, cv_folds=3, subsample_runs=2)
    result = select_features(pool, y, cfg)
    assert result.task == "classification"
    if not result.empty:
        informative = {k for k in result.selected_keys if "x1" in k or "x2" in k}
        assert informative, f"selected {result.selected_keys} carry no signal variables"
