"""Benchmark harness: seeded k-fold comparison against a ridge baseline.

Methods are "ridge" (the original columns, no engineering) and "afr1" to
"afr3" (the full pipeline at one to three construction steps). Results are
deterministic for a given seed; wall times of course are not, so they live
in their own column and nothing derives from them.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .dataio import Dataset, load_dataset
from .errors import DataError
from .model import RIDGE_ALPHA, FittedModel, _assemble_design, fit
from .selection import SelectionConfig, infer_task
from .sparse import StandardizationStats, logistic_ridge_fit, r2_score, ridge_fit, standardize
from .synthesis import EngineeringConfig

METHODS = ("ridge", "afr1", "afr2", "afr3")


@dataclass(frozen=True)
class MethodResult:
    """One dataset x method x fold measurement."""

    dataset: str
    method: str
    fold: int
    train_r2: float
    test_r2: float
    n_engineered: int
    n_selected: int
    seconds: float
    seed: int
    split: str


@dataclass
class BenchmarkReport:
    run_id: str
    seed: int
    folds: int
    results: list[MethodResult]
    feature_forms: dict[str, Counter]

    def to_csv(self) -> str:
        lines = ["dataset,method,fold,train_r2,test_r2,n_engineered,n_selected,seconds,seed,split"]
        for r in self.results:
            lines.append(
                f"{r.dataset},{r.method},{r.fold},{r.train_r2!r},{r.test_r2!r},"
                f'{r.n_engineered},{r.n_selected},{r.seconds:.2f},{r.seed},"{r.split}"'
            )
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        out = [f"# Benchmark run {self.run_id}", "", f"seed {self.seed}, {self.folds}-fold CV", ""]
        datasets = sorted({r.dataset for r in self.results})
        for ds in datasets:
            out.append(f"## {ds}")
            out.append("")
            out.append("| method | mean train R2 | mean test R2 | pool size | selected | time/fold (s) |")
            out.append("|---|---|---|---|---|---|")
            for method in METHODS:
                rows = [r for r in self.results if r.dataset == ds and r.method == method]
                if not rows:
                    continue
                tr = np.mean([r.train_r2 for r in rows])
                te = np.mean([r.test_r2 for r in rows])
                pool = int(np.mean([r.n_engineered for r in rows]))
                sel = int(np.mean([r.n_selected for r in rows]))
                sec = np.mean([r.seconds for r in rows])
                out.append(f"| {method} | {tr:.4f} | {te:.4f} | {pool} | {sel} | {sec:.1f} |")
            out.append("")
            forms = [
                (key, self.feature_forms[key])
                for key in sorted(self.feature_forms)
                if key.startswith(ds + "/")
            ]
            for key, counter in forms:
                if not counter:
                    continue
                out.append(f"most selected forms, {key.split('/', 1)[1]}:")
                out.append("")
                for form, count in counter.most_common(10):
                    out.append(f"- `{form}` in {count}/{self.folds} folds")
                out.append("")
        return "\n".join(out) + "\n"


def kfold_indices(n: int, folds: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded shuffled k-fold; returns (train, test) index pairs."""
    if folds < 2 or folds > n:
        raise DataError(f"cannot make {folds} folds from {n} rows")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    parts = np.array_split(perm, folds)
    out = []
    for i in range(folds):
        test = np.sort(parts[i])
        train = np.sort(np.concatenate([parts[j] for j in range(folds) if j != i]))
        out.append((train, test))
    return out


def slice_dataset(ds: Dataset, idx: np.ndarray) -> Dataset:
    return Dataset(
        name=ds.name,
        columns={c: np.asarray(v)[idx] for c, v in ds.columns.items()},
        kinds=dict(ds.kinds),
        units=dict(ds.units),
        target=ds.target,
        y=np.asarray(ds.y)[idx],
        provenance=ds.provenance,
    )


def ridge_baseline(train: Dataset, test: Dataset, alpha: float = RIDGE_ALPHA) -> tuple[float, float, int]:
    """Ridge (or light logistic) on the raw columns; returns train/test R2
    and the design width."""
    from .synthesis import one_hot_levels

    onehot = {
        c: tuple(one_hot_levels(np.asarray(train.columns[c]).astype(str)))
        for c in train.columns
        if train.kinds.get(c, "numeric") == "categorical"
    }
    names = tuple(train.columns)
    T_tr, _ = _assemble_design(names, train.kinds, onehot, (), train.columns)
    T_te, _ = _assemble_design(names, test.kinds, onehot, (), test.columns)
    Z_tr, stats = standardize(T_tr)
    task = infer_task(np.asarray(train.y))
    if task == "classification":
        coef, intercept = logistic_ridge_fit(Z_tr, train.y, alpha)
    else:
        coef, intercept = ridge_fit(Z_tr, train.y, alpha)
    pred_tr = intercept + Z_tr @ coef
    pred_te = intercept + stats.apply(T_te) @ coef
    return (
        r2_score(train.y, pred_tr),
        r2_score(test.y, pred_te),
        T_tr.shape[1],
    )


def run_method(
    method: str,
    train: Dataset,
    test: Dataset,
    seed: int,
    threads: int = 1,
) -> tuple[float, float, int, int, FittedModel | None]:
    """(train R2, test R2, pool size, selected count, model or None)."""
    if method == "ridge":
        tr, te, width = ridge_baseline(train, test)
        return tr, te, 0, width, None
    if method not in ("afr1", "afr2", "afr3"):
        raise DataError(f"unknown method {method!r}")
    steps = int(method[-1])
    model = fit(
        train,
        EngineeringConfig(steps=steps),
        SelectionConfig(seed=seed),
        threads=threads,
    )
    pred_tr = model.predict(train)
    pred_te = model.predict(test)
    tr = r2_score(train.y, pred_tr)
    # a constant prediction on the test fold scores 0 by convention
    te = r2_score(test.y, pred_te) if np.ptp(pred_te) > 0 else 0.0
    return tr, te, model.n_pool or 0, len(model.selected_keys), model


def run_benchmark(
    dataset_ids: list[str],
    methods: tuple[str, ...] = METHODS,
    *,
    seed: int = 0,
    folds: int = 5,
    threads: int = 1,
    cache_dir: Path | None = None,
    datasets: dict[str, Dataset] | None = None,
) -> BenchmarkReport:
    """Cross-validated comparison over the named datasets.

    `datasets` can inject preloaded data (tests use this); anything not in
    it is fetched through the manifest registry.
    """
    run_id = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ") + f"-s{seed}"
    results: list[MethodResult] = []
    forms: dict[str, Counter] = {}
    for ds_id in dataset_ids:
        ds = datasets[ds_id] if datasets and ds_id in datasets else load_dataset(ds_id, cache_dir)
        split_pairs = kfold_indices(ds.n, folds, seed)
        for method in methods:
            counter = forms.setdefault(f"{ds.name}/{method}", Counter())
            for fold, (train_idx, test_idx) in enumerate(split_pairs):
                train = slice_dataset(ds, train_idx)
                test = slice_dataset(ds, test_idx)
                t0 = time.perf_counter()
                tr, te, pool, sel, model = run_method(method, train, test, seed + fold, threads)
                dt = time.perf_counter() - t0
                results.append(
                    MethodResult(
                        dataset=ds.name,
                        method=method,
                        fold=fold,
                        train_r2=tr,
                        test_r2=te,
                        n_engineered=pool,
                        n_selected=sel,
                        seconds=dt,
                        seed=seed + fold,
                        split=f"fold {fold + 1}/{folds} of seed-{seed} shuffled k-fold",
                    )
                )
                if model is not None:
                    counter.update(model.selected_keys)
    return BenchmarkReport(run_id=run_id, seed=seed, folds=folds, results=results, feature_forms=forms)


def write_report(report: BenchmarkReport, out_dir: str | Path) -> Path:
    """Write markdown + CSV under out_dir/<run_id>/ and append to the run index."""
    out_dir = Path(out_dir)
    run_dir = out_dir / report.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "report.md").write_text(report.to_markdown(), encoding="utf-8")
    (run_dir / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    index = out_dir / "runs.csv"
    line = f"{report.run_id},{report.seed},{report.folds},{len(report.results)}\n"
    if index.exists():
        with open(index, "a", encoding="utf-8") as fh:
            fh.write(line)
    else:
        index.write_text("run_id,seed,folds,rows\n" + line, encoding="utf-8")
    return run_dir
