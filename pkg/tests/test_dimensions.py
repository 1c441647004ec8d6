"""Units, dimension arithmetic, and dimensionless-group extraction."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featforge.dimensions import (
    BASE_SYMBOLS,
    DIMENSIONLESS,
    Dimension,
    DimensionMatrix,
    combine,
    format_unit,
    parse_unit,
    pi_groups,
    transform_dimension,
)
from featforge.errors import SchemaError


def dim(**exps) -> Dimension:
    vec = [Fraction(0)] * len(BASE_SYMBOLS)
    for sym, e in exps.items():
        vec[BASE_SYMBOLS.index(sym)] = Fraction(e)
    return Dimension(tuple(vec))


# ---------------------------------------------------------------------------
# unit grammar


def test_parse_unit_basic_forms():
    assert parse_unit("m/s^2") == dim(m=1, s=-2)
    assert parse_unit("kg*m^-3") == dim(kg=1, m=-3)
    assert parse_unit("1") == DIMENSIONLESS
    assert parse_unit("m^1/2") == dim(m=Fraction(1, 2))
    assert parse_unit("kg*m/s^2") == dim(kg=1, m=1, s=-2)
    assert parse_unit(" m / s ") == dim(m=1, s=-1)


def test_parse_unit_rejects_bad_grammar():
    for bad in ("", "foo", "m^", "m+s", "m//s", "m^x", "2"):
        with pytest.raises(SchemaError):
            parse_unit(bad)


@given(
    st.lists(st.integers(-4, 4), min_size=len(BASE_SYMBOLS), max_size=len(BASE_SYMBOLS))
)
@settings(max_examples=200, deadline=None)
def test_format_parse_round_trip(exps):
    d = Dimension(tuple(Fraction(e) for e in exps))
    assert parse_unit(format_unit(d)) == d


# ---------------------------------------------------------------------------
# dimension arithmetic


def test_combine_add_requires_matching_dimensions():
    assert combine("add", dim(m=1), dim(m=1)) == dim(m=1)
    assert combine("add", dim(m=1), dim(s=1)) is None
    assert combine("sub", dim(m=1), dim(kg=1)) is None


def test_combine_mul_adds_exponents():
    assert combine("mul", dim(m=1, s=-1), dim(s=-1)) == dim(m=1, s=-2)


def test_transform_dimension_powers():
    assert transform_dimension("square", dim(m=1)) == dim(m=2)
    assert transform_dimension("cube", dim(s=-1)) == dim(s=-3)
    assert transform_dimension("recip", dim(m=2)) == dim(m=-2)
    assert transform_dimension("sqrt", dim(m=2)) == dim(m=1)
    assert transform_dimension("abs", dim(kg=1)) == dim(kg=1)


def test_transform_dimension_dimensionless_only_gates():
    for tag in ("log", "exp", "exp2", "sin", "cos"):
        assert transform_dimension(tag, DIMENSIONLESS) == DIMENSIONLESS
        assert transform_dimension(tag, dim(m=1)) is None


# ---------------------------------------------------------------------------
# dimensionless groups


def test_pendulum_group():
    # g, length, period: the single dimensionless product is g * l^-1 * T^2
    matrix = DimensionMatrix(
        variables=("g", "l", "T"),
        columns=(parse_unit("m/s^2"), parse_unit("m"), parse_unit("s")),
    )
    groups = pi_groups(matrix)
    assert groups == [(1, -1, 2)]


def test_reynolds_group():
    # density, velocity, length, dynamic viscosity
    matrix = DimensionMatrix(
        variables=("rho", "v", "L", "mu"),
        columns=(
            parse_unit("kg/m^3"),
            parse_unit("m/s"),
            parse_unit("m"),
            parse_unit("kg/m/s"),
        ),
    )
    groups = pi_groups(matrix)
    assert groups == [(1, 1, 1, -1)]


def test_all_dimensionless_inputs_yield_full_basis():
    matrix = DimensionMatrix(
        variables=("a", "b"), columns=(DIMENSIONLESS, DIMENSIONLESS)
    )
    groups = pi_groups(matrix)
    assert len(groups) == 2


def test_no_group_when_columns_independent():
    matrix = DimensionMatrix(
        variables=("l", "t"), columns=(parse_unit("m"), parse_unit("s"))
    )
    assert pi_groups(matrix) == []


@given(st.integers(0, 100_000))
@settings(max_examples=300, deadline=None)
def test_nullspace_vectors_annihilate_the_matrix(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 8))
    n_dims = int(rng.integers(1, 4))
    cols = []
    for _ in range(d):
        vec = [Fraction(0)] * len(BASE_SYMBOLS)
        for i in range(n_dims):
            vec[i] = Fraction(int(rng.integers(-3, 4)))
        cols.append(Dimension(tuple(vec)))
    matrix = DimensionMatrix(tuple(f"v{i}" for i in range(d)), tuple(cols))
    groups = pi_groups(matrix)
    for vec in groups:
        assert any(vec), "trivial all-zero basis vector"
        for row in matrix.rows():
            assert sum(e * v for e, v in zip(row, vec)) == 0  # exact, Fraction math
    # count matches d - rank via an independent float-rank check
    rank = np.linalg.matrix_rank(np.array(matrix.rows(), dtype=float))
    assert len(groups) == d - rank
