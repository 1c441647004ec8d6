"""End-to-end model: engineer a pool, select, fit a small linear readout.

The fitted artifact stays interpretable on purpose: every design column is
either a raw input (numeric or one-hot level) or a selected expression with
a canonical string form, and the readout is ridge regression (or lightly
regularized logistic regression) over the standardized design. `transform`
and `predict` replay the stored expressions on new data; nothing about the
fit is implicit in runtime state, so a saved model reloads losslessly.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .dataio import Dataset
from .dimensions import format_unit
from .errors import DataError, MissingColumnError
from .expr import DomainViolation, FeatureExpr, evaluate, parse_key, pretty
from .selection import SelectionConfig, SelectionResult, infer_task, select_features
from .sparse import StandardizationStats, logistic_ridge_fit, ridge_fit, standardize
from .synthesis import EngineeringConfig, engineer, one_hot_levels

RIDGE_ALPHA = 1e-4


def _sigmoid(s: np.ndarray) -> np.ndarray:
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _assemble_design(
    input_names: tuple[str, ...],
    kinds: Mapping[str, str],
    onehot: Mapping[str, tuple[str, ...]],
    engineered: tuple[FeatureExpr, ...],
    columns: Mapping[str, np.ndarray],
) -> tuple[np.ndarray, list[str]]:
    """Design matrix in stored order: numeric inputs, one-hot levels, then
    engineered expressions. Returns the matrix plus violation descriptions."""
    missing = [c for c in input_names if c not in columns]
    if missing:
        raise MissingColumnError(missing)
    lengths = {len(np.asarray(columns[c])) for c in input_names}
    if len(lengths) != 1:
        raise DataError(f"input columns disagree on length: {sorted(lengths)}")
    n = lengths.pop()

    base: dict[str, np.ndarray] = {}
    blocks: list[np.ndarray] = []
    for name in input_names:
        if kinds.get(name, "numeric") == "categorical":
            vals = np.asarray(columns[name]).astype(str)
            for level in onehot[name]:
                col = (vals == level).astype(np.float64)
                base[f"{name}={level}"] = col
                blocks.append(col)
        else:
            col = np.asarray(columns[name], dtype=np.float64)
            base[name] = col
            blocks.append(col)

    cache: dict[str, np.ndarray] = {}
    violations: list[DomainViolation] = []
    for expr in engineered:
        blocks.append(evaluate(expr, base, cache=cache, violations=violations))
    T = np.column_stack(blocks) if blocks else np.empty((n, 0))
    return T, [str(v) for v in violations]


@dataclass
class FittedModel:
    """Everything needed to transform and predict, in serializable form."""

    task: str
    target: str
    input_names: tuple[str, ...]
    kinds: dict[str, str]
    units: dict[str, str | None]
    onehot: dict[str, tuple[str, ...]]
    engineered: tuple[FeatureExpr, ...]
    engineered_units: tuple[str, ...]
    selected_keys: tuple[str, ...]
    stats: StandardizationStats
    coef: np.ndarray
    intercept: float
    alpha: float
    eng_cfg: EngineeringConfig
    sel_cfg: SelectionConfig
    # fit-time diagnostics; not persisted
    selection: SelectionResult | None = field(default=None, repr=False, compare=False)
    n_pool: int | None = field(default=None, repr=False, compare=False)

    @property
    def feature_names(self) -> list[str]:
        """Design column names in stored order."""
        names: list[str] = []
        for name in self.input_names:
            if self.kinds.get(name, "numeric") == "categorical":
                names.extend(f"{name}={level}" for level in self.onehot[name])
            else:
                names.append(name)
        names.extend(e.key for e in self.engineered)
        return names

    def transform(self, data: Dataset | Mapping[str, np.ndarray]) -> np.ndarray:
        """Raw design matrix for new rows, unstandardized, in stored order.

        Rows outside an expression's domain come back non-finite with a
        warning naming the expression and row indices; they never raise.
        One-hot columns encode levels seen at fit time, so an unseen level
        contributes all zeros.
        """
        columns = data.columns if isinstance(data, Dataset) else data
        T, violations = _assemble_design(
            self.input_names, self.kinds, self.onehot, self.engineered, columns
        )
        if violations:
            warnings.warn("domain violations: " + "; ".join(violations), stacklevel=2)
        return T

    def predict(self, data: Dataset | Mapping[str, np.ndarray]) -> np.ndarray:
        """Regression: intercept plus standardized design times coefficients.
        Classification: the probability of class 1 through the logistic link."""
        Z = self.stats.apply(self.transform(data))
        s = self.intercept + Z @ self.coef
        return _sigmoid(s) if self.task == "classification" else s

    def predict_labels(self, data: Dataset | Mapping[str, np.ndarray]) -> np.ndarray:
        if self.task != "classification":
            raise DataError("predict_labels applies to classification models")
        return (self.predict(data) >= 0.5).astype(np.float64)

    # ------------------------------------------------------------------
    # persistence payload; file framing and the version field live in dataio

    def to_payload(self) -> dict:
        return {
            "task": self.task,
            "target": self.target,
            "input_names": list(self.input_names),
            "kinds": dict(self.kinds),
            "units": dict(self.units),
            "onehot": {k: list(v) for k, v in self.onehot.items()},
            "engineered": [
                {"key": e.key, "unit": u}
                for e, u in zip(self.engineered, self.engineered_units)
            ],
            "selected_keys": list(self.selected_keys),
            "standardization": {
                "mean": self.stats.mean.tolist(),
                "std": self.stats.std.tolist(),
                "constant": [bool(b) for b in self.stats.constant],
            },
            "coef": self.coef.tolist(),
            "intercept": self.intercept,
            "alpha": self.alpha,
            "engineering_config": asdict(self.eng_cfg),
            "selection_config": asdict(self.sel_cfg),
        }

    @staticmethod
    def from_payload(payload: dict) -> "FittedModel":
        try:
            eng_raw = dict(payload["engineering_config"])
            eng_raw["transforms"] = tuple(eng_raw["transforms"])
            sel_raw = dict(payload["selection_config"])
            sel_raw["noise_modes"] = tuple(sel_raw["noise_modes"])
            std = payload["standardization"]
            stats = StandardizationStats(
                mean=np.asarray(std["mean"], dtype=np.float64),
                std=np.asarray(std["std"], dtype=np.float64),
                constant=np.asarray(std["constant"], dtype=bool),
            )
            return FittedModel(
                task=payload["task"],
                target=payload["target"],
                input_names=tuple(payload["input_names"]),
                kinds=dict(payload["kinds"]),
                units=dict(payload["units"]),
                onehot={k: tuple(v) for k, v in payload["onehot"].items()},
                engineered=tuple(parse_key(e["key"]) for e in payload["engineered"]),
                engineered_units=tuple(e["unit"] for e in payload["engineered"]),
                selected_keys=tuple(payload["selected_keys"]),
                stats=stats,
                coef=np.asarray(payload["coef"], dtype=np.float64),
                intercept=float(payload["intercept"]),
                alpha=float(payload["alpha"]),
                eng_cfg=EngineeringConfig(**eng_raw),
                sel_cfg=SelectionConfig(**sel_raw),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"model payload is malformed: {exc}") from exc


def fit(
    dataset: Dataset,
    eng_cfg: EngineeringConfig | None = None,
    sel_cfg: SelectionConfig | None = None,
    *,
    task: str | None = None,
    threads: int = 1,
    alpha: float = RIDGE_ALPHA,
) -> FittedModel:
    """Engineer, select, and fit the final readout on all rows.

    Selection sees at most `eng_cfg.max_rows` rows (a seeded subsample);
    the readout is refit on every row. The selection seed comes from
    `sel_cfg.seed` and also drives the row subsample, so one seed pins the
    whole run. `threads` parallelizes selection without changing results.
    """
    eng_cfg = eng_cfg or EngineeringConfig()
    sel_cfg = sel_cfg or SelectionConfig()
    y = np.asarray(dataset.y, dtype=np.float64)
    if task is None:
        task = infer_task(y)

    pool = engineer(dataset.columns, dataset.kinds, dataset.units, eng_cfg, seed=sel_cfg.seed)
    result = select_features(pool, y[pool.row_indices], sel_cfg, task=task, threads=threads)
    if result.empty:
        warnings.warn(
            "selection kept no engineered features; the model uses the original columns only"
        )

    engineered: list[FeatureExpr] = []
    engineered_units: list[str] = []
    for key in result.selected_keys:
        entry = pool.entries[pool.index[key]]
        if entry.expr.op == "var":
            continue  # already a design column
        engineered.append(entry.expr)
        engineered_units.append(format_unit(entry.dim))

    onehot: dict[str, tuple[str, ...]] = {}
    for name in dataset.columns:
        if dataset.kinds.get(name, "numeric") == "categorical":
            vals = np.asarray(dataset.columns[name]).astype(str)
            onehot[name] = tuple(one_hot_levels(vals))

    model = FittedModel(
        task=task,
        target=dataset.target,
        input_names=tuple(dataset.columns),
        kinds=dict(dataset.kinds),
        units=dict(dataset.units),
        onehot=onehot,
        engineered=tuple(engineered),
        engineered_units=tuple(engineered_units),
        selected_keys=result.selected_keys,
        stats=StandardizationStats(np.empty(0), np.empty(0), np.empty(0, dtype=bool)),
        coef=np.empty(0),
        intercept=0.0,
        alpha=alpha,
        eng_cfg=eng_cfg,
        sel_cfg=sel_cfg,
        selection=result,
        n_pool=len(pool),
    )

    T, violations = _assemble_design(
        model.input_names, model.kinds, model.onehot, model.engineered, dataset.columns
    )
    if violations:
        warnings.warn("domain violations: " + "; ".join(violations), stacklevel=2)
    finite = np.isfinite(T).all(axis=1)
    if not finite.all():
        warnings.warn(
            f"{int((~finite).sum())} rows have non-finite engineered values and are "
            "excluded from the readout fit"
        )
    Zfit, stats = standardize(T[finite])
    if task == "classification":
        coef, intercept = logistic_ridge_fit(Zfit, y[finite], alpha)
    else:
        coef, intercept = ridge_fit(Zfit, y[finite], alpha)
    model.stats = stats
    model.coef = coef
    model.intercept = intercept
    return model


def fit_transform(
    dataset: Dataset,
    eng_cfg: EngineeringConfig | None = None,
    sel_cfg: SelectionConfig | None = None,
    *,
    task: str | None = None,
    threads: int = 1,
    alpha: float = RIDGE_ALPHA,
) -> tuple[FittedModel, np.ndarray]:
    """Fit, then return the model with its design matrix on the fit rows.

    The matrix equals `model.transform` on the same data bit for bit; the
    expressions are replayed through the same evaluator either way.
    """
    model = fit(dataset, eng_cfg, sel_cfg, task=task, threads=threads, alpha=alpha)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # fit already reported violations
        T = model.transform(dataset)
    return model, T


# ---------------------------------------------------------------------------
# coefficient report


@dataclass(frozen=True)
class ReportRow:
    rank: int
    name: str
    display: str
    unit: str
    coef_standardized: float
    coef_raw: float
    column_std: float
    column_mean: float


@dataclass
class CoefficientReport:
    """Readout coefficients ranked by standardized magnitude."""

    task: str
    target: str
    intercept: float
    rows: tuple[ReportRow, ...]

    def to_text(self) -> str:
        lines = [
            f"target: {self.target}    task: {self.task}    intercept: {self.intercept!r}",
            "",
            f"{'rank':>4}  {'coef(std)':>14}  {'coef(raw)':>14}  {'col std':>12}  feature",
        ]
        for r in self.rows:
            unit = f" [{r.unit}]" if r.unit and r.unit != "1" else ""
            lines.append(
                f"{r.rank:>4}  {r.coef_standardized:>14.6g}  {r.coef_raw:>14.6g}  "
                f"{r.column_std:>12.6g}  {r.display}{unit}"
            )
        return "\n".join(lines) + "\n"


def coefficient_report(model: FittedModel) -> CoefficientReport:
    """Rank design columns by |standardized coefficient|.

    The standardized coefficient is what the readout was fit with; the raw
    coefficient rescales it by the column's fit-time std (zero for constant
    columns) so it applies to unstandardized inputs.
    """
    names = model.feature_names
    n_eng = len(model.engineered)
    displays = list(names[: len(names) - n_eng])
    units = [model.units.get(n) or "" for n in displays]
    for expr, unit in zip(model.engineered, model.engineered_units):
        displays.append(pretty(expr))
        units.append(unit)

    eff = np.where(model.stats.constant, 1.0, model.stats.std)
    raw = np.where(model.stats.constant, 0.0, model.coef / eff)
    order = sorted(
        range(len(names)), key=lambda j: (-abs(float(model.coef[j])), names[j])
    )
    rows = tuple(
        ReportRow(
            rank=r + 1,
            name=names[j],
            display=displays[j],
            unit=units[j],
            coef_standardized=float(model.coef[j]),
            coef_raw=float(raw[j]),
            column_std=float(model.stats.std[j]),
            column_mean=float(model.stats.mean[j]),
        )
        for r, j in enumerate(order)
    )
    return CoefficientReport(
        task=model.task, target=model.target, intercept=float(model.intercept), rows=rows
    )
