"""Expression trees: canonical keys, simplification, evaluation."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featforge.errors import MissingColumnError
from featforge.expr import (
    add,
    const,
    evaluate,
    mul,
    parse_key,
    pretty,
    simplify,
    sub,
    unary,
    var,
)

from conftest import make_columns, random_expr

X = var("x")
Y = var("y")


# ---------------------------------------------------------------------------
# canonical keys


def test_key_forms():
    assert X.key == "c:x"
    assert const(3).key == "k:3"
    assert const(Fraction(-1, 2)).key == "k:-1/2"
    assert unary("log", X).key == "log(c:x)"
    assert sub(X, Y).key == "sub(c:x,c:y)"


def test_key_escapes_structural_characters():
    weird = var("a,b(c)%d")
    assert parse_key(weird.key).name == "a,b(c)%d"
    # the escaped key must not confuse the parser inside a larger tree
    tree = add(weird, Y)
    assert parse_key(tree.key).key == tree.key


@given(st.integers(0, 5000))
@settings(max_examples=300, deadline=None)
def test_parse_key_round_trip(seed):
    rng = np.random.default_rng(seed)
    e = random_expr(rng, ["x", "y", "z"], depth=4)
    assert parse_key(e.key).key == e.key
    s = simplify(e)
    assert parse_key(s.key).key == s.key


def test_parse_key_rejects_garbage():
    for bad in ("", "c:", "frob(c:x)", "add(c:x)", "sub(c:x,c:y,c:z)", "k:1/0", "c:x)"):
        with pytest.raises(ValueError):
            parse_key(bad)


def test_complexity_counts_binary_nodes():
    assert X.complexity == 1
    assert unary("log", X).complexity == 2
    # n-ary chains count as nested binary applications
    assert add(X, Y, var("z")).complexity == 5
    assert mul(X, Y).complexity == 3


# ---------------------------------------------------------------------------
# simplification oracles, each derivable by hand from one identity


def test_inverse_pairs_cancel():
    assert simplify(unary("log", unary("exp", X))).key == "c:x"
    assert simplify(unary("exp", unary("log", X))).key == "c:x"
    assert simplify(unary("recip", unary("recip", X))).key == "c:x"
    assert simplify(unary("square", unary("sqrt", X))).key == "c:x"


def test_sqrt_of_square_is_abs():
    assert simplify(unary("sqrt", unary("square", X))).key == "abs(c:x)"
    assert simplify(unary("abs", unary("abs", X))).key == "abs(c:x)"


def test_self_subtraction_vanishes():
    assert simplify(sub(X, X)).key == "k:0"
    assert simplify(sub(add(X, Y), add(Y, X))).key == "k:0"


def test_subtraction_normalizes_to_add_or_scale():
    assert simplify(sub(X, const(2))).key == "add(k:-2,c:x)"
    assert simplify(sub(const(0), X)).key == "mul(k:-1,c:x)"


def test_like_terms_merge():
    assert simplify(add(X, X)).key == "mul(k:2,c:x)"
    assert simplify(add(X, mul(const(-1), X))).key == "k:0"


def test_power_merging():
    assert simplify(mul(X, X)).key == "square(c:x)"
    assert simplify(mul(X, unary("recip", X))).key == "k:1"
    assert simplify(mul(unary("sqrt", X), unary("sqrt", X))).key == "c:x"
    # x^5 renders as factors with 2^a*3^b exponents
    assert simplify(mul(X, X, X, X, X)).key == "mul(cube(c:x),square(c:x))"


def test_constant_folding():
    assert simplify(unary("square", const(Fraction(-3, 2)))).key == "k:9/4"
    assert simplify(unary("sqrt", const(Fraction(9, 4)))).key == "k:3/2"
    assert simplify(unary("recip", const(4))).key == "k:1/4"
    assert simplify(unary("log", const(1))).key == "k:0"
    assert simplify(mul(const(2), const(3), X)).key == "mul(k:6,c:x)"
    assert simplify(add(const(2), const(-2))).key == "k:0"


def test_chain_flattening_and_ordering():
    nested = add(X, add(Y, var("z")))
    flat = simplify(nested)
    assert flat.key == "add(c:x,c:y,c:z)"
    assert simplify(mul(Y, mul(X, var("z")))).key == "mul(c:x,c:y,c:z)"


@given(st.integers(0, 5000))
@settings(max_examples=300, deadline=None)
def test_simplify_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    e = random_expr(rng, ["x", "y"], depth=4)
    s = simplify(e)
    assert simplify(s).key == s.key


@given(st.integers(0, 5000))
@settings(max_examples=200, deadline=None)
def test_simplify_preserves_values(seed):
    rng = np.random.default_rng(seed)
    e = random_expr(rng, ["x", "y", "z"], depth=4)
    cols = make_columns(rng, ["x", "y", "z"], n=48)
    with np.errstate(all="ignore"):
        raw = evaluate(e, cols)
        simp = evaluate(simplify(e), cols)
    ok = np.isfinite(raw)
    # rewrites may extend the domain but never shrink it
    assert np.isfinite(simp[ok]).all()
    assert np.allclose(raw[ok], simp[ok], rtol=1e-9, atol=1e-12)


# ---------------------------------------------------------------------------
# evaluation


def test_evaluate_missing_column():
    with pytest.raises(MissingColumnError) as err:
        evaluate(add(X, var("nope")), {"x": np.ones(3)})
    assert "nope" in str(err.value)


def test_evaluate_uses_cache():
    cache = {}
    cols = {"x": np.array([1.0, 2.0, 3.0])}
    e = unary("log", X)
    first = evaluate(e, cols, cache=cache)
    cache[e.key] = np.full(3, 42.0)  # poison to prove the cache is consulted
    second = evaluate(e, cols, cache=cache)
    assert np.all(second == 42.0)
    assert np.allclose(first, np.log(cols["x"]))


def test_evaluate_records_domain_violations():
    violations = []
    cols = {"x": np.array([1.0, -1.0, 2.0])}
    with np.errstate(all="ignore"):
        out = evaluate(unary("log", X), cols, violations=violations)
    assert len(violations) == 1
    assert violations[0].expr_key == "log(c:x)"
    assert list(violations[0].rows) == [1]
    assert np.isnan(out[1]) and np.isfinite(out[0])


def test_evaluate_nonfinite_inputs_do_not_count_as_violations():
    violations = []
    cols = {"x": np.array([np.nan, 1.0])}
    with np.errstate(all="ignore"):
        evaluate(unary("log", X), cols, violations=violations)
    assert violations == []


# ---------------------------------------------------------------------------
# pretty printing


def test_pretty_readable_forms():
    assert pretty(simplify(mul(X, X))) == "x**2"
    assert pretty(unary("recip", X)) == "1/x"
    assert pretty(simplify(sub(X, const(2)))) in ("x - 2", "-2 + x")
    assert pretty(add(X, Y)) == "x + y"


@given(st.integers(0, 2000))
@settings(max_examples=150, deadline=None)
def test_pretty_total(seed):
    rng = np.random.default_rng(seed)
    e = simplify(random_expr(rng, ["x", "y"], depth=4))
    text = pretty(e)
    assert isinstance(text, str) and text
