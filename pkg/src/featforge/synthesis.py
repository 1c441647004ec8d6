"""Feature pool synthesis: alternating transform and combination steps.

Step 1 applies unary transforms to the original columns (plus any injected
dimensionless product groups); step 2 forms pairwise combinations a+b,
a-b, b-a, a*b over everything present; step 3 applies transforms to the
step-2 survivors only. Candidates are simplified to canonical form, checked
against unit legality and numeric domain guards, and deduplicated first by
canonical key and then by a numeric screen that drops any column identical
to an existing one within tolerance (the higher-complexity copy loses).
Each step's accepted batch is sorted by canonical key before it is appended,
so the pool order is reproducible regardless of how candidates were
produced.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dimensions import DIMENSIONLESS, Dimension, DimensionMatrix, combine, pi_groups, transform_dimension
from .errors import DataError
from .expr import TRANSFORMS, FeatureExpr, evaluate, simplify, unary, var, sub as esub, mul as emul, add as eadd
from .expr import _pow_factors  # reuse the canonical power renderer for pi groups
from fractions import Fraction


@dataclass(frozen=True)
class EngineeringConfig:
    """Knobs for pool synthesis; defaults follow the library conventions."""

    steps: int = 2
    transforms: tuple[str, ...] = TRANSFORMS
    max_rows: int = 10_000
    max_pi_groups: int = 10
    reciprocal_eps: float = 1e-12
    exp_max_abs: float = 50.0
    magnitude_cap: float = 1e15
    duplicate_tol: float = 1e-12

    def __post_init__(self):
        if not 1 <= self.steps <= 3:
            raise ValueError("steps must be 1, 2, or 3")
        unknown = [t for t in self.transforms if t not in TRANSFORMS]
        if unknown:
            raise ValueError(f"unknown transforms: {unknown}")
        if not self.transforms:
            raise ValueError("need at least one transform")
        if self.max_rows < 1:
            raise ValueError("max_rows must be positive")


@dataclass
class PoolEntry:
    """One retained feature: expression, unit, and its column on the fit rows."""

    expr: FeatureExpr
    dim: Dimension
    column: np.ndarray

    @property
    def key(self) -> str:
        return self.expr.key

    @property
    def complexity(self) -> int:
        return self.expr.complexity


@dataclass
class StepCounts:
    stage: str
    generated: int = 0
    kept: int = 0
    illegal_unit: int = 0
    domain_guard: int = 0
    nonfinite: int = 0
    magnitude: int = 0
    duplicate_key: int = 0
    duplicate_numeric: int = 0

    def line(self) -> str:
        return (
            f"{self.stage}: generated={self.generated} kept={self.kept} "
            f"illegal_unit={self.illegal_unit} domain_guard={self.domain_guard} "
            f"nonfinite={self.nonfinite} magnitude={self.magnitude} "
            f"dup_key={self.duplicate_key} dup_numeric={self.duplicate_numeric}"
        )


@dataclass
class SynthesisReport:
    steps: list[StepCounts] = field(default_factory=list)
    pool_sizes: list[int] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [s.line() for s in self.steps]
        lines.append("pool sizes after each stage: " + ", ".join(str(s) for s in self.pool_sizes))
        return "\n".join(lines)


@dataclass
class FeaturePool:
    """Ordered feature collection; the first `n_original` entries are the
    untouched input columns (one-hot levels included) and are protected from
    every pruning stage."""

    entries: list[PoolEntry]
    n_original: int
    row_indices: np.ndarray
    report: SynthesisReport
    stage_offsets: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.index = {e.key: i for i, e in enumerate(self.entries)}

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def keys(self) -> list[str]:
        return [e.key for e in self.entries]

    def matrix(self) -> np.ndarray:
        return np.asfortranarray(np.column_stack([e.column for e in self.entries]))

    def subset(self, indices: np.ndarray | list[int]) -> "FeaturePool":
        indices = list(indices)
        kept_orig = sum(1 for i in indices if i < self.n_original)
        entries = [self.entries[i] for i in indices]
        return FeaturePool(
            entries=entries,
            n_original=kept_orig,
            row_indices=self.row_indices,
            report=self.report,
            stage_offsets=[],
        )


def subsample_rows(n: int, max_rows: int, seed: int) -> np.ndarray:
    """Row indices used for synthesis: all rows, or a seeded sorted sample."""
    if n <= max_rows:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=max_rows, replace=False))


def one_hot_levels(values: np.ndarray) -> list[str]:
    return sorted({str(v) for v in values})


def engineer(
    columns: dict[str, np.ndarray],
    kinds: dict[str, str],
    units: dict[str, str | None],
    cfg: EngineeringConfig,
    seed: int = 0,
) -> FeaturePool:
    """Build the feature pool from raw input columns.

    `columns` maps names to 1-d arrays; `kinds` marks each as "numeric" or
    "categorical"; `units` optionally gives a unit string per numeric column
    (None means dimensionless). Categorical columns become one binary column
    per observed level, named "col=level".
    """
    from .dimensions import parse_unit

    names = list(columns)
    if not names:
        raise DataError("no input columns")
    n = len(next(iter(columns.values())))
    rows = subsample_rows(n, cfg.max_rows, seed)
    report = SynthesisReport()
    entries: list[PoolEntry] = []
    taken: set[str] = set(names)
    for name in names:
        kind = kinds.get(name, "numeric")
        colv = columns[name]
        if kind == "categorical":
            vals = np.asarray(colv).astype(str)[rows]
            for level in one_hot_levels(vals):
                hname = f"{name}={level}"
                if hname in taken:
                    raise DataError(f"one-hot name {hname!r} collides with an input column")
                taken.add(hname)
                col = (vals == level).astype(np.float64)
                entries.append(PoolEntry(simplify(var(hname)), DIMENSIONLESS, col))
        else:
            col = np.asarray(colv, dtype=np.float64)[rows]
            if not np.isfinite(col).all():
                raise DataError(f"column {name!r} has non-finite values")
            unit = units.get(name)
            dim = parse_unit(unit) if unit else DIMENSIONLESS
            entries.append(PoolEntry(simplify(var(name)), dim, col))
    pool = FeaturePool(entries=entries, n_original=len(entries), row_indices=rows, report=report)
    base_columns = {e.expr.name: e.column for e in pool.entries}
    cache: dict[str, np.ndarray] = {}

    _inject_pi_groups(pool, cfg, base_columns, cache)
    report.pool_sizes.append(len(pool))
    pool.stage_offsets.append(len(pool))

    last_hi = len(pool)
    if cfg.steps >= 1:
        _apply_transforms(pool, cfg, 0, last_hi, base_columns, cache, "step1")
        report.pool_sizes.append(len(pool))
        pool.stage_offsets.append(len(pool))
    if cfg.steps >= 2:
        lo2 = len(pool)
        _combine_pairs(pool, cfg, base_columns, cache, "step2")
        report.pool_sizes.append(len(pool))
        pool.stage_offsets.append(len(pool))
        if cfg.steps >= 3:
            _apply_transforms(pool, cfg, lo2, len(pool), base_columns, cache, "step3")
            report.pool_sizes.append(len(pool))
            pool.stage_offsets.append(len(pool))
    pool.index = {e.key: i for i, e in enumerate(pool.entries)}
    return pool


def _inject_pi_groups(pool, cfg, base_columns, cache) -> None:
    numeric = [(e.expr.name, e.dim) for e in pool.entries if not e.dim.dimensionless]
    if not numeric:
        return
    counts = StepCounts("pi-groups")
    pool.report.steps.append(counts)
    matrix = DimensionMatrix(tuple(n for n, _ in numeric), tuple(d for _, d in numeric))
    groups = pi_groups(matrix)
    batch: list[PoolEntry] = []
    batch_keys: set[str] = set()
    for vec in groups[: cfg.max_pi_groups]:
        counts.generated += 1
        factors: list[FeatureExpr] = []
        for (name, _), e in zip(numeric, vec):
            if e == 0:
                continue
            factors.extend(_pow_factors(var(name), Fraction(e)))
        if not factors:
            continue
        expr = simplify(factors[0] if len(factors) == 1 else emul(*factors))
        _admit(pool, batch, batch_keys, expr, DIMENSIONLESS, cfg, base_columns, cache, counts)
    _merge_batch(pool, batch, batch_keys, cfg, counts)


def _apply_transforms(pool, cfg, lo, hi, base_columns, cache, stage) -> None:
    counts = StepCounts(stage)
    pool.report.steps.append(counts)
    batch: list[PoolEntry] = []
    batch_keys: set[str] = set()
    for i in range(lo, hi):
        src = pool.entries[i]
        for tag in cfg.transforms:
            counts.generated += 1
            dim = transform_dimension(tag, src.dim)
            if dim is None:
                counts.illegal_unit += 1
                continue
            if not _domain_ok(tag, src.column, cfg):
                counts.domain_guard += 1
                continue
            expr = simplify(unary(tag, src.expr))
            _admit(pool, batch, batch_keys, expr, dim, cfg, base_columns, cache, counts)
    _merge_batch(pool, batch, batch_keys, cfg, counts)


def _combine_pairs(pool, cfg, base_columns, cache, stage) -> None:
    counts = StepCounts(stage)
    pool.report.steps.append(counts)
    batch: list[PoolEntry] = []
    batch_keys: set[str] = set()
    m = len(pool.entries)
    for i in range(m):
        a = pool.entries[i]
        for j in range(i + 1, m):
            b = pool.entries[j]
            # one difference per pair: the reverse is its negation, which a
            # linear readout absorbs into the sign of the coefficient. Key
            # order fixes the direction independent of pool order.
            lo, hi = (a, b) if a.key <= b.key else (b, a)
            for op, build in (
                ("add", lambda: eadd(a.expr, b.expr)),
                ("sub", lambda: esub(lo.expr, hi.expr)),
                ("mul", lambda: emul(a.expr, b.expr)),
            ):
                counts.generated += 1
                dim = combine(op, a.dim, b.dim)
                if dim is None:
                    counts.illegal_unit += 1
                    continue
                expr = simplify(build())
                _admit(pool, batch, batch_keys, expr, dim, cfg, base_columns, cache, counts)
    _merge_batch(pool, batch, batch_keys, cfg, counts)


def _domain_ok(tag: str, col: np.ndarray, cfg: EngineeringConfig) -> bool:
    if tag == "log":
        return bool((col > 0).all())
    if tag == "sqrt":
        return bool((col >= 0).all())
    if tag == "recip":
        return bool((np.abs(col) > cfg.reciprocal_eps).all())
    if tag in ("exp", "exp2"):
        return bool(np.max(np.abs(col)) <= cfg.exp_max_abs)
    return True


def _admit(pool, batch, batch_keys, expr, dim, cfg, base_columns, cache, counts) -> None:
    key = expr.key
    if key in pool.index or key in batch_keys:
        counts.duplicate_key += 1
        return
    col = evaluate(expr, base_columns, cache=cache)
    if not np.isfinite(col).all():
        counts.nonfinite += 1
        return
    if col.size and float(np.max(np.abs(col))) > cfg.magnitude_cap:
        counts.magnitude += 1
        return
    batch_keys.add(key)
    batch.append(PoolEntry(expr, dim, col))


def _merge_batch(pool, batch, batch_keys, cfg, counts) -> None:
    """Numeric-duplicate screen, then append survivors in canonical key order.

    Near-duplicates are found by sorting a fixed random projection of every
    column: two columns within `duplicate_tol` elementwise project within
    duplicate_tol * ||w||_1 of each other, so only a sorted window needs the
    exact elementwise check. Existing pool entries always win; within the
    batch the lower-complexity candidate (key as tie-break) wins.
    """
    if not batch:
        return
    batch.sort(key=lambda e: (e.complexity, e.key))
    cols = [e.column for e in pool.entries] + [e.column for e in batch]
    n_exist = len(pool.entries)
    nrows = cols[0].size if cols else 0
    w = np.random.default_rng(1234_5678).standard_normal(nrows)
    l1w = float(np.sum(np.abs(w))) if nrows else 0.0
    proj = np.array([float(c @ w) for c in cols])
    order = np.argsort(proj, kind="stable")
    window = cfg.duplicate_tol * max(l1w, 1.0) * (1 + 1e-9)
    dropped = np.zeros(len(cols), dtype=bool)
    for pos, idx in enumerate(order):
        if idx < n_exist:
            continue
        back = pos - 1
        while back >= 0 and proj[idx] - proj[order[back]] <= window:
            jdx = order[back]
            back -= 1
            if dropped[jdx]:
                continue
            keeper, loser = (jdx, idx) if _wins(jdx, idx, n_exist, batch) else (idx, jdx)
            if loser >= n_exist and np.max(np.abs(cols[idx] - cols[jdx]), initial=0.0) <= cfg.duplicate_tol:
                dropped[loser] = True
                if loser == idx:
                    break
    kept = [e for k, e in enumerate(batch) if not dropped[n_exist + k]]
    counts.duplicate_numeric += len(batch) - len(kept)
    kept.sort(key=lambda e: e.key)
    for e in kept:
        pool.index[e.key] = len(pool.entries)
        pool.entries.append(e)
    counts.kept += len(kept)


def _wins(a: int, b: int, n_exist: int, batch) -> bool:
    """True when column a outranks column b in the duplicate screen."""
    if a < n_exist:
        return True
    if b < n_exist:
        return False
    ea, eb = batch[a - n_exist], batch[b - n_exist]
    return (ea.complexity, ea.key) <= (eb.complexity, eb.key)
