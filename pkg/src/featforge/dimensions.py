"""Physical dimensions as exact rational exponent vectors.

A dimension is a 7-vector of Fraction exponents over the SI base quantities
(meter, kilogram, second, ampere, kelvin, mole, candela). Unit strings use
the grammar

    unit     := "1" | term {("*" | "/") term}
    term     := symbol ["^" exponent]
    exponent := ["-"] int ["/" int]
    symbol   := m kg s A K mol cd

e.g. "kg*m^-3", "m/s^2", "1". Dimensionless groups of a set of dimensioned
variables come from the exact rational nullspace of the 7 x d exponent
matrix; elimination runs fraction-free over scaled integers so no floating
point is involved anywhere.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

from .errors import SchemaError

BASE_SYMBOLS = ("m", "kg", "s", "A", "K", "mol", "cd")
N_BASE = len(BASE_SYMBOLS)

_ZERO = (Fraction(0),) * N_BASE


@dataclass(frozen=True)
class Dimension:
    """Exponents over the 7 SI base quantities, in BASE_SYMBOLS order."""

    exponents: tuple[Fraction, ...] = _ZERO

    def __post_init__(self):
        if len(self.exponents) != N_BASE:
            raise ValueError(f"need {N_BASE} exponents, got {len(self.exponents)}")

    @property
    def dimensionless(self) -> bool:
        return all(e == 0 for e in self.exponents)

    def __mul__(self, other: "Dimension") -> "Dimension":
        return Dimension(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def pow(self, k: int | Fraction) -> "Dimension":
        k = Fraction(k)
        return Dimension(tuple(e * k for e in self.exponents))

    def __str__(self) -> str:
        return format_unit(self)


DIMENSIONLESS = Dimension()


_TERM_RE = re.compile(r"([A-Za-z]+|1)(?:\^(-?\d+(?:/\d+)?))?")


def parse_unit(text: str) -> Dimension:
    """Parse a unit string; raises SchemaError on unknown symbols or syntax."""
    s = text.strip().replace(" ", "")
    if not s:
        raise SchemaError("empty unit string")
    exps = [Fraction(0)] * N_BASE
    pos = 0
    sign = 1
    first = True
    while pos < len(s):
        if not first:
            if s[pos] == "*":
                sign = 1
            elif s[pos] == "/":
                sign = -1
            else:
                raise SchemaError(f"expected '*' or '/' at {pos} in unit {text!r}")
            pos += 1
        m = _TERM_RE.match(s, pos)
        if m is None:
            raise SchemaError(f"bad unit term at {pos} in {text!r}")
        sym, etxt = m.group(1), m.group(2)
        exp = Fraction(etxt) if etxt else Fraction(1)
        pos = m.end()
        first = False
        if sym == "1":
            continue
        try:
            idx = BASE_SYMBOLS.index(sym)
        except ValueError:
            raise SchemaError(f"unknown unit symbol {sym!r} in {text!r}") from None
        exps[idx] += sign * exp
    return Dimension(tuple(exps))


def format_unit(d: Dimension) -> str:
    parts = []
    for sym, e in zip(BASE_SYMBOLS, d.exponents):
        if e == 0:
            continue
        parts.append(sym if e == 1 else f"{sym}^{e}")
    return "*".join(parts) if parts else "1"


def combine(op: str, a: Dimension, b: Dimension) -> Dimension | None:
    """Dimension of a binary combination; None marks an illegal pairing."""
    if op in ("add", "sub"):
        return a if a.exponents == b.exponents else None
    if op == "mul":
        return a * b
    raise ValueError(f"unknown operator {op!r}")


_POWER_TAGS = {"square": 2, "cube": 3, "recip": -1, "abs": 1}
_HALF_TAGS = {"sqrt": Fraction(1, 2)}
_DIMLESS_ONLY = frozenset(("log", "exp", "exp2", "sin", "cos"))


def transform_dimension(tag: str, d: Dimension) -> Dimension | None:
    """Dimension after a unary transform; None marks an illegal application."""
    if tag in _POWER_TAGS:
        return d.pow(_POWER_TAGS[tag])
    if tag in _HALF_TAGS:
        return d.pow(_HALF_TAGS[tag])
    if tag in _DIMLESS_ONLY:
        return DIMENSIONLESS if d.dimensionless else None
    raise ValueError(f"unknown transform {tag!r}")


@dataclass(frozen=True)
class DimensionMatrix:
    """Columns are variables, rows the 7 base quantities."""

    variables: tuple[str, ...]
    columns: tuple[Dimension, ...]

    def __post_init__(self):
        if len(self.variables) != len(self.columns):
            raise ValueError("one dimension per variable")

    def rows(self) -> list[list[Fraction]]:
        return [[col.exponents[i] for col in self.columns] for i in range(N_BASE)]


def pi_groups(matrix: DimensionMatrix) -> list[tuple[int, ...]]:
    """Exponent vectors of the dimensionless products of the variables.

    Basis of the exact nullspace of the exponent matrix, each vector scaled
    to the smallest integer exponents with a positive leading entry. Count
    is d - rank; empty when the only dimensionless product is trivial.
    """
    basis = _rational_nullspace(matrix.rows(), len(matrix.variables))
    out = []
    for vec in basis:
        out.append(_smallest_integers(vec))
    return out


def _rational_nullspace(rows: list[list[Fraction]], width: int) -> list[list[Fraction]]:
    # scale every row to integers; row scaling leaves the nullspace unchanged
    mat: list[list[int]] = []
    for row in rows:
        den = 1
        for v in row:
            den = den * v.denominator // gcd(den, v.denominator)
        ints = [int(v * den) for v in row]
        if any(ints):
            mat.append(ints)
    # fraction-free (Bareiss) forward elimination with column pivot tracking
    pivots: list[tuple[int, int]] = []  # (row, col)
    r = 0
    prev = 1
    col = 0
    while r < len(mat) and col < width:
        piv = next((i for i in range(r, len(mat)) if mat[i][col] != 0), None)
        if piv is None:
            col += 1
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        for i in range(r + 1, len(mat)):
            for j in range(col + 1, width):
                mat[i][j] = (mat[i][j] * mat[r][col] - mat[r][j] * mat[i][col]) // prev
            mat[i][col] = 0
        prev = mat[r][col]
        pivots.append((r, col))
        r += 1
        col += 1
    pivot_cols = [c for _, c in pivots]
    free_cols = [c for c in range(width) if c not in pivot_cols]
    # back-substitute one basis vector per free column, exactly
    basis = []
    for fc in free_cols:
        vec = [Fraction(0)] * width
        vec[fc] = Fraction(1)
        for pr, pc in reversed(pivots):
            acc = Fraction(0)
            for j in range(pc + 1, width):
                acc += mat[pr][j] * vec[j]
            vec[pc] = -acc / mat[pr][pc]
        basis.append(vec)
    return basis


def _smallest_integers(vec: list[Fraction]) -> tuple[int, ...]:
    den = 1
    for v in vec:
        den = den * v.denominator // gcd(den, v.denominator)
    ints = [int(v * den) for v in vec]
    g = 0
    for v in ints:
        g = gcd(g, abs(v))
    if g > 1:
        ints = [v // g for v in ints]
    lead = next((v for v in ints if v != 0), 0)
    if lead < 0:
        ints = [-v for v in ints]
    return tuple(ints)
