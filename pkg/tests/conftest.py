"""Shared fixtures and generators for the test suite."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from featforge.dataio import Dataset
from featforge.expr import TRANSFORMS, FeatureExpr, add, const, mul, sub, unary, var


def random_expr(rng: np.random.Generator, names: list[str], depth: int = 3) -> FeatureExpr:
    """Random expression tree over the given variable names.

    Leaves are mostly variables with occasional small rational constants;
    interior nodes draw from the unary transform set and the add/sub/mul
    combiners. Depth 0 forces a leaf.
    """
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.15:
            num = int(rng.integers(-4, 5))
            den = int(rng.integers(1, 4))
            return const(Fraction(num, den))
        return var(str(rng.choice(names)))
    roll = rng.random()
    if roll < 0.45:
        tag = str(rng.choice(TRANSFORMS))
        return unary(tag, random_expr(rng, names, depth - 1))
    if roll < 0.65:
        return add(random_expr(rng, names, depth - 1), random_expr(rng, names, depth - 1))
    if roll < 0.85:
        return mul(random_expr(rng, names, depth - 1), random_expr(rng, names, depth - 1))
    return sub(random_expr(rng, names, depth - 1), random_expr(rng, names, depth - 1))


def make_columns(rng: np.random.Generator, names: list[str], n: int = 64) -> dict[str, np.ndarray]:
    """Strictly positive sample points so log/sqrt/recip stay in domain."""
    return {name: rng.uniform(0.5, 3.0, n) for name in names}


def planted_dataset(seed: int, n: int = 300, distractors: int = 10, sigma: float = 0.05) -> Dataset:
    """y = 3*x1 - 2/x2 + noise, with extra inputs carrying no signal."""
    rng = np.random.default_rng(seed)
    columns = {f"x{i}": rng.uniform(0.5, 3.0, n) for i in range(1, distractors + 3)}
    y = 3.0 * columns["x1"] - 2.0 / columns["x2"] + sigma * rng.standard_normal(n)
    return Dataset(
        name="planted",
        columns=columns,
        kinds={c: "numeric" for c in columns},
        units={c: None for c in columns},
        target="y",
        y=y,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260816)
