"""Symbolic feature expressions over named input columns.

Trees are immutable. `simplify` rewrites a tree toward a canonical form:
commutative chains are flattened and sorted, exact rational constants are
folded, integer/half-integer powers of a common base are merged, and a fixed
set of algebraic identities is applied until the tree stops changing (pass
count bounded). Structural identity of canonical trees is captured by
`FeatureExpr.key`, a deterministic prefix-notation string used for
deduplication and model persistence.

Key grammar (stable; parse with `parse_key`):

    node := "c:" name           column reference, name %-escaped
          | "k:" rational       exact constant, e.g. k:3, k:-1/2
          | tag "(" node {"," node} ")"

    tag  := log sqrt recip square cube abs exp exp2 sin cos   (unary)
          | add mul    (n-ary; constant operand first, rest sorted by key)
          | sub        (binary, order significant)

Rewriting never uses floating point: constants are `fractions.Fraction`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Mapping

import numpy as np

from .errors import MissingColumnError

TRANSFORMS = ("log", "sqrt", "recip", "square", "cube", "abs", "exp", "exp2", "sin", "cos")
OPERATORS = ("add", "sub", "mul")

_UNARY = frozenset(TRANSFORMS)
_CHAIN = frozenset(("add", "mul"))
_VALID_OPS = _UNARY | frozenset(OPERATORS) | frozenset(("var", "const"))


@dataclass(frozen=True)
class FeatureExpr:
    """One node of an expression tree. Build via var/const/unary/add/sub/mul."""

    op: str
    args: tuple["FeatureExpr", ...] = ()
    name: str = ""
    value: Fraction = Fraction(0)

    @cached_property
    def key(self) -> str:
        if self.op == "var":
            return "c:" + _escape(self.name)
        if self.op == "const":
            return "k:" + str(self.value)
        return f"{self.op}({','.join(a.key for a in self.args)})"

    @cached_property
    def complexity(self) -> int:
        """Node count of the equivalent binary tree; a leaf costs 1."""
        if self.op in ("var", "const"):
            return 1
        child = sum(a.complexity for a in self.args)
        if self.op in _CHAIN:
            return child + len(self.args) - 1
        return child + 1

    def columns(self) -> set[str]:
        out: set[str] = set()
        for node in self.walk():
            if node.op == "var":
                out.add(node.name)
        return out

    def walk(self) -> Iterator["FeatureExpr"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.args)

    def __repr__(self) -> str:
        return f"FeatureExpr[{self.key}]"


def _escape(name: str) -> str:
    out = []
    for ch in name:
        if ch == "%":
            out.append("%25")
        elif ch == "(":
            out.append("%28")
        elif ch == ")":
            out.append("%29")
        elif ch == ",":
            out.append("%2C")
        else:
            out.append(ch)
    return "".join(out)


def _unescape(text: str) -> str:
    return (
        text.replace("%28", "(").replace("%29", ")").replace("%2C", ",").replace("%25", "%")
    )


def var(name: str) -> FeatureExpr:
    if not name:
        raise ValueError("column name must be non-empty")
    return FeatureExpr("var", name=name)


def const(value: int | Fraction) -> FeatureExpr:
    return FeatureExpr("const", value=Fraction(value))


def unary(tag: str, arg: FeatureExpr) -> FeatureExpr:
    if tag not in _UNARY:
        raise ValueError(f"unknown transform {tag!r}")
    return FeatureExpr(tag, (arg,))


def add(*args: FeatureExpr) -> FeatureExpr:
    if len(args) < 2:
        raise ValueError("add needs at least two operands")
    return FeatureExpr("add", tuple(args))


def mul(*args: FeatureExpr) -> FeatureExpr:
    if len(args) < 2:
        raise ValueError("mul needs at least two operands")
    return FeatureExpr("mul", tuple(args))


def sub(a: FeatureExpr, b: FeatureExpr) -> FeatureExpr:
    return FeatureExpr("sub", (a, b))


# ---------------------------------------------------------------------------
# simplification


def simplify(expr: FeatureExpr, max_passes: int = 10) -> FeatureExpr:
    """Rewrite to a fixed point of the rule set, bounded by `max_passes`."""
    cur = expr
    for _ in range(max_passes):
        nxt = _rewrite(cur)
        if nxt.key == cur.key:
            return cur
        cur = nxt
    return cur


def _rewrite(e: FeatureExpr) -> FeatureExpr:
    if e.op in ("var", "const"):
        return e
    args = tuple(_rewrite(a) for a in e.args)
    if e.op in _UNARY:
        return _unary_rules(e.op, args[0])
    if e.op == "sub":
        return _sub_rules(args[0], args[1])
    return _chain_rules(e.op, list(args))


def _unary_rules(tag: str, u: FeatureExpr) -> FeatureExpr:
    if u.op == "const":
        folded = _fold_unary_const(tag, u.value)
        if folded is not None:
            return const(folded)
    if tag == "log" and u.op == "exp":
        return u.args[0]
    if tag == "exp" and u.op == "log":
        return u.args[0]
    if tag == "sqrt" and u.op == "square":
        # sqrt(x^2) = |x|, not x
        return _unary_rules("abs", u.args[0])
    if tag == "square" and u.op == "sqrt":
        return u.args[0]
    if tag == "square" and u.op == "abs":
        return _unary_rules("square", u.args[0])
    if tag == "abs" and u.op in ("abs", "sqrt", "exp", "exp2", "square"):
        return u
    if tag == "recip" and u.op == "recip":
        return u.args[0]
    return FeatureExpr(tag, (u,))


def _fold_unary_const(tag: str, v: Fraction) -> Fraction | None:
    if tag == "square":
        return v * v
    if tag == "cube":
        return v * v * v
    if tag == "abs":
        return abs(v)
    if tag == "recip":
        return None if v == 0 else 1 / v
    if tag == "sqrt":
        if v < 0:
            return None
        num, den = v.numerator, v.denominator
        rn, rd = _isqrt_exact(num), _isqrt_exact(den)
        if rn is not None and rd is not None:
            return Fraction(rn, rd)
        return None
    if tag == "log":
        return Fraction(0) if v == 1 else None
    if tag in ("exp", "exp2"):
        return Fraction(1) if v == 0 else None
    if tag == "sin":
        return Fraction(0) if v == 0 else None
    if tag == "cos":
        return Fraction(1) if v == 0 else None
    return None


def _isqrt_exact(n: int) -> int | None:
    r = int(n**0.5)
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand * cand == n:
            return cand
    return None


def _sub_rules(a: FeatureExpr, b: FeatureExpr) -> FeatureExpr:
    if a.key == b.key:
        return const(0)
    if b.op == "const":
        # a - k folds into an add chain with constant -k
        return _chain_rules("add", [a, const(-b.value)])
    if a.op == "const" and a.value == 0:
        return _chain_rules("mul", [const(-1), b])
    return FeatureExpr("sub", (a, b))


def _chain_rules(op: str, args: list[FeatureExpr]) -> FeatureExpr:
    flat: list[FeatureExpr] = []
    for a in args:
        if a.op == op:
            flat.extend(a.args)
        else:
            flat.append(a)
    if op == "mul":
        return _mul_chain(flat)
    return _add_chain(flat)


def _mul_chain(factors: list[FeatureExpr]) -> FeatureExpr:
    const_acc = Fraction(1)
    powers: dict[str, tuple[FeatureExpr, Fraction]] = {}
    for f in factors:
        if f.op == "const":
            const_acc *= f.value
            continue
        core, q = _decompose(f)
        k = core.key
        if k in powers:
            powers[k] = (core, powers[k][1] + q)
        else:
            powers[k] = (core, q)
    if const_acc == 0:
        return const(0)
    parts: list[FeatureExpr] = []
    for k in sorted(powers):
        core, q = powers[k]
        if q == 0:
            continue
        parts.extend(_pow_factors(core, q))
    parts.sort(key=lambda p: p.key)
    if const_acc != 1:
        parts.insert(0, const(const_acc))
    if not parts:
        return const(const_acc)
    if len(parts) == 1:
        return parts[0]
    return FeatureExpr("mul", tuple(parts))


def _decompose(f: FeatureExpr) -> tuple[FeatureExpr, Fraction]:
    """Split a factor into (base, exponent) for power merging."""
    if f.op == "recip":
        core, q = _decompose(f.args[0])
        return core, -q
    if f.op == "square":
        core, q = _decompose(f.args[0])
        return core, 2 * q
    if f.op == "cube":
        core, q = _decompose(f.args[0])
        return core, 3 * q
    if f.op == "sqrt":
        core, q = _decompose(f.args[0])
        # only sound when the inner power keeps the base's sign
        if q.numerator % 2 != 0:
            return core, q / 2
        return f, Fraction(1)
    return f, Fraction(1)


def _pow_factors(core: FeatureExpr, q: Fraction) -> list[FeatureExpr]:
    """Render core**q as a list of canonical factors; decompose-stable."""
    neg = q < 0
    aq = -q if neg else q
    num, den = aq.numerator, aq.denominator
    parts = _int_pow_parts(core, num)
    if den > 1:
        # reduced fraction with power-of-two denominator: wrap in sqrt
        if den & (den - 1) != 0:
            raise AssertionError(f"exponent denominator {den} is not a power of two")
        node = parts[0] if len(parts) == 1 else FeatureExpr("mul", tuple(sorted(parts, key=lambda p: p.key)))
        for _ in range(den.bit_length() - 1):
            node = FeatureExpr("sqrt", (node,))
        parts = [node]
    if neg:
        parts = [FeatureExpr("recip", (p,)) for p in parts]
    return parts


def _int_pow_parts(core: FeatureExpr, n: int) -> list[FeatureExpr]:
    """core**n (n >= 1) as factors whose exponents are of the form 2^a*3^b."""
    parts: list[FeatureExpr] = []
    while n:
        if _renderable(n):
            parts.append(_render_23(core, n))
            break
        r = n - 2
        while not _renderable(r):
            r -= 1
        parts.append(_render_23(core, r))
        n -= r
    return parts


def _renderable(n: int) -> bool:
    while n % 3 == 0:
        n //= 3
    while n % 2 == 0:
        n //= 2
    return n == 1


def _render_23(core: FeatureExpr, n: int) -> FeatureExpr:
    if n == 1:
        return core
    if n % 3 == 0:
        return FeatureExpr("cube", (_render_23(core, n // 3),))
    return FeatureExpr("square", (_render_23(core, n // 2),))


def _add_chain(terms: list[FeatureExpr]) -> FeatureExpr:
    const_acc = Fraction(0)
    coeffs: dict[str, tuple[Fraction, FeatureExpr]] = {}
    for t in terms:
        if t.op == "const":
            const_acc += t.value
            continue
        c, rest = _split_coeff(t)
        k = rest.key
        if k in coeffs:
            coeffs[k] = (coeffs[k][0] + c, rest)
        else:
            coeffs[k] = (c, rest)
    parts: list[FeatureExpr] = []
    for k in sorted(coeffs):
        c, rest = coeffs[k]
        if c == 0:
            continue
        if c == 1:
            parts.append(rest)
        else:
            parts.append(_mul_chain([const(c), rest]))
    parts.sort(key=lambda p: p.key)
    if const_acc != 0:
        parts.insert(0, const(const_acc))
    if not parts:
        return const(const_acc)
    if len(parts) == 1:
        return parts[0]
    return FeatureExpr("add", tuple(parts))


def _split_coeff(t: FeatureExpr) -> tuple[Fraction, FeatureExpr]:
    if t.op == "mul" and t.args and t.args[0].op == "const":
        rest = t.args[1:]
        node = rest[0] if len(rest) == 1 else FeatureExpr("mul", rest)
        return t.args[0].value, node
    return Fraction(1), t


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class DomainViolation:
    """Rows where a subexpression produced a non-finite value from finite inputs."""

    expr_key: str
    rows: np.ndarray

    def __str__(self) -> str:
        head = ", ".join(str(r) for r in self.rows[:8])
        more = "" if len(self.rows) <= 8 else f" (+{len(self.rows) - 8} more)"
        return f"{self.expr_key}: rows [{head}]{more}"


def evaluate(
    expr: FeatureExpr,
    columns: Mapping[str, np.ndarray],
    *,
    cache: dict[str, np.ndarray] | None = None,
    violations: list[DomainViolation] | None = None,
) -> np.ndarray:
    """Evaluate over float64 column vectors; non-finite values propagate.

    `cache` maps canonical keys to already-computed columns and is shared
    across expressions so repeated subtrees cost one evaluation. When
    `violations` is a list, every subexpression that turns finite inputs
    into non-finite output is recorded with the offending row indices.
    """
    missing = sorted(expr.columns() - set(columns))
    if missing:
        raise MissingColumnError(missing)
    if not columns:
        raise ValueError("evaluate needs at least one column to fix the row count")
    n = len(next(iter(columns.values())))
    return _eval_node(expr, columns, n, cache if cache is not None else {}, violations)


def _eval_node(
    e: FeatureExpr,
    columns: Mapping[str, np.ndarray],
    n: int,
    cache: dict[str, np.ndarray],
    violations: list[DomainViolation] | None,
) -> np.ndarray:
    k = e.key
    hit = cache.get(k)
    if hit is not None:
        return hit
    if e.op == "var":
        v = np.asarray(columns[e.name], dtype=np.float64)
    elif e.op == "const":
        v = np.full(n, float(e.value))
    else:
        kids = [_eval_node(a, columns, n, cache, violations) for a in e.args]
        with np.errstate(all="ignore"):
            v = _apply_op(e.op, kids)
        if violations is not None:
            bad = ~np.isfinite(v)
            if bad.any():
                kids_ok = np.ones(n, dtype=bool)
                for kid in kids:
                    kids_ok &= np.isfinite(kid)
                introduced = bad & kids_ok
                if introduced.any():
                    violations.append(DomainViolation(k, np.flatnonzero(introduced)))
    cache[k] = v
    return v


def _apply_op(op: str, kids: list[np.ndarray]) -> np.ndarray:
    if op == "log":
        return np.log(kids[0])
    if op == "sqrt":
        return np.sqrt(kids[0])
    if op == "recip":
        return np.divide(1.0, kids[0])
    if op == "square":
        return np.square(kids[0])
    if op == "cube":
        return np.square(kids[0]) * kids[0]
    if op == "abs":
        return np.abs(kids[0])
    if op == "exp":
        return np.exp(kids[0])
    if op == "exp2":
        return np.exp2(kids[0])
    if op == "sin":
        return np.sin(kids[0])
    if op == "cos":
        return np.cos(kids[0])
    if op == "add":
        total = kids[0]
        for kid in kids[1:]:
            total = total + kid
        return total
    if op == "sub":
        return kids[0] - kids[1]
    if op == "mul":
        total = kids[0]
        for kid in kids[1:]:
            total = total * kid
        return total
    raise AssertionError(f"unreachable op {op!r}")


# ---------------------------------------------------------------------------
# canonical-key parsing


def parse_key(text: str) -> FeatureExpr:
    """Inverse of `FeatureExpr.key` for canonical trees."""
    node, pos = _parse_node(text, 0)
    if pos != len(text):
        raise ValueError(f"trailing characters at {pos} in key {text!r}")
    return node


def _parse_node(s: str, pos: int) -> tuple[FeatureExpr, int]:
    if s.startswith("c:", pos):
        end = _scan_atom(s, pos + 2)
        name = _unescape(s[pos + 2 : end])
        if not name:
            raise ValueError(f"empty column name at {pos} in {s!r}")
        return var(name), end
    if s.startswith("k:", pos):
        end = _scan_atom(s, pos + 2)
        try:
            value = Fraction(s[pos + 2 : end])
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"bad constant at {pos} in {s!r}") from exc
        return const(value), end
    par = s.find("(", pos)
    if par < 0:
        raise ValueError(f"expected node at {pos} in {s!r}")
    tag = s[pos:par]
    if tag not in _UNARY and tag not in OPERATORS:
        raise ValueError(f"unknown tag {tag!r} in {s!r}")
    args: list[FeatureExpr] = []
    cur = par + 1
    while True:
        node, cur = _parse_node(s, cur)
        args.append(node)
        if cur >= len(s):
            raise ValueError(f"unterminated {tag!r} in {s!r}")
        if s[cur] == ",":
            cur += 1
            continue
        if s[cur] == ")":
            cur += 1
            break
        raise ValueError(f"expected ',' or ')' at {cur} in {s!r}")
    if tag in _UNARY and len(args) != 1:
        raise ValueError(f"{tag} takes one operand in {s!r}")
    if tag == "sub" and len(args) != 2:
        raise ValueError(f"sub takes two operands in {s!r}")
    if tag in _CHAIN and len(args) < 2:
        raise ValueError(f"{tag} takes two or more operands in {s!r}")
    return FeatureExpr(tag, tuple(args)), cur


def _scan_atom(s: str, pos: int) -> int:
    end = pos
    while end < len(s) and s[end] not in ",()":
        end += 1
    return end


# ---------------------------------------------------------------------------
# display


def pretty(expr: FeatureExpr) -> str:
    """Human-readable infix rendering used in reports."""
    return _pretty(expr, parent="")


def _frac_str(v: Fraction) -> str:
    return str(v)


def _pretty(e: FeatureExpr, parent: str) -> str:
    if e.op == "var":
        return e.name
    if e.op == "const":
        s = _frac_str(e.value)
        if parent in ("mul", "pow") and (e.value < 0 or e.value.denominator != 1):
            return f"({s})"
        return s
    if e.op in ("log", "sqrt", "exp", "sin", "cos", "abs"):
        return f"{e.op}({_pretty(e.args[0], '')})"
    if e.op == "exp2":
        return f"2**{_pretty_atom(e.args[0])}"
    if e.op == "square":
        return f"{_pretty_atom(e.args[0])}**2"
    if e.op == "cube":
        return f"{_pretty_atom(e.args[0])}**3"
    if e.op == "recip":
        return f"1/{_pretty_atom(e.args[0])}"
    if e.op == "mul":
        num, den = [], []
        for a in e.args:
            if a.op == "recip":
                den.append(a.args[0])
            else:
                num.append(a)
        num_s = "*".join(_pretty_factor(a) for a in num) if num else "1"
        if not den:
            body = num_s
        elif len(den) == 1:
            body = f"{num_s}/{_pretty_atom(den[0])}"
        else:
            body = f"{num_s}/({'*'.join(_pretty_factor(a) for a in den)})"
        if parent in ("sub-right",):
            return f"({body})"
        return body
    if e.op == "add":
        body = " + ".join(_pretty(a, "add") for a in e.args)
        body = body.replace("+ -", "- ")
        if parent in ("mul", "pow", "sub-right"):
            return f"({body})"
        return body
    if e.op == "sub":
        left = _pretty(e.args[0], "add")
        right = _pretty(e.args[1], "sub-right")
        body = f"{left} - {right}"
        if parent in ("mul", "pow"):
            return f"({body})"
        return body
    raise AssertionError(f"unreachable op {e.op!r}")


def _pretty_factor(e: FeatureExpr) -> str:
    return _pretty(e, "mul")


def _pretty_atom(e: FeatureExpr) -> str:
    s = _pretty(e, "pow")
    if e.op in ("var", "const", "square", "cube", "recip") or s.startswith("("):
        return s
    if e.op in ("log", "sqrt", "exp", "sin", "cos", "abs"):
        return s
    return f"({s})"
