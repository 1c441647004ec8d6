"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data or schema error, 3 numeric
non-convergence. `--threads` only parallelizes work; results are identical
at every thread count.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench, dataio, model as model_mod
from .errors import ConvergenceError, DataError, MissingColumnError
from .expr import TRANSFORMS
from .selection import SelectionConfig, select_features
from .synthesis import EngineeringConfig, engineer


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage errors are 1 here
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_engineering_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--steps", type=int, choices=(1, 2, 3), default=2, help="construction steps")
    p.add_argument(
        "--transforms",
        default=None,
        help="comma-separated subset of: " + ",".join(TRANSFORMS),
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)


def _add_schema_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--units-schema", default=None, help="sidecar JSON schema (kinds, units, target)")
    p.add_argument("--target", default=None, help="target column when no schema is given")


def _build_parser() -> _Parser:
    parser = _Parser(prog="featforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="download and cache a benchmark dataset")
    p.add_argument("dataset", choices=sorted(dataio.MANIFESTS))
    p.add_argument("--cache-dir", default=None)

    p = sub.add_parser("fit", help="fit a model on a CSV and save it")
    p.add_argument("data")
    p.add_argument("--out", required=True, help="where to write the model JSON")
    _add_schema_flags(p)
    _add_engineering_flags(p)
    p.add_argument("--task", choices=("regression", "classification"), default=None)

    p = sub.add_parser("transform", help="emit the engineered design matrix for new rows")
    p.add_argument("data")
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    _add_schema_flags(p)

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("data")
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.add_argument("--labels", action="store_true", help="0/1 labels instead of probabilities")
    _add_schema_flags(p)

    p = sub.add_parser("select", help="run synthesis plus selection, print the kept features")
    p.add_argument("data")
    _add_schema_flags(p)
    _add_engineering_flags(p)

    p = sub.add_parser("benchmark", help="cross-validated comparison against the ridge baseline")
    p.add_argument("--datasets", default="diabetes", help="comma-separated dataset ids")
    p.add_argument("--methods", default=",".join(bench.METHODS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None, help="directory for markdown/CSV reports")
    p.add_argument("--cache-dir", default=None)

    p = sub.add_parser("report", help="coefficient report of a saved model")
    p.add_argument("--model", required=True)

    return parser


def _engineering_config(args) -> EngineeringConfig:
    transforms = tuple(t for t in args.transforms.split(",") if t) if args.transforms else TRANSFORMS
    try:
        return EngineeringConfig(steps=args.steps, transforms=transforms)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def _load_input(args) -> dataio.Dataset:
    path = Path(args.data)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    if args.units_schema:
        schema = dataio.load_schema(args.units_schema)
    else:
        schema = dataio.infer_schema(path, target=args.target)
    return dataio.load_csv(path, schema)


def _write_matrix(header: list[str], matrix: np.ndarray, out: str | None) -> None:
    lines = [",".join(header)]
    for row in np.atleast_2d(matrix):
        lines.append(",".join(repr(float(v)) for v in row))
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_fetch(args) -> int:
    cache = Path(args.cache_dir) if args.cache_dir else None
    ds = dataio.load_dataset(args.dataset, cache)
    print(f"{ds.name}: {ds.n} rows, {ds.d} input columns, target {ds.target!r}")
    return 0


def _cmd_fit(args) -> int:
    ds = _load_input(args)
    m = model_mod.fit(
        ds,
        _engineering_config(args),
        SelectionConfig(seed=args.seed),
        task=args.task,
        threads=args.threads,
    )
    dataio.save_model(m, args.out)
    print(f"selected {len(m.selected_keys)} features from a pool of {m.n_pool}; model -> {args.out}")
    for key in m.selected_keys:
        print(f"  {key}")
    return 0


def _cmd_transform(args) -> int:
    m = dataio.load_model(args.model)
    columns = _load_input_for_model(args, m)
    T = m.transform(columns)
    _write_matrix(m.feature_names, T, args.out)
    return 0


def _cmd_predict(args) -> int:
    m = dataio.load_model(args.model)
    columns = _load_input_for_model(args, m)
    pred = m.predict_labels(columns) if args.labels else m.predict(columns)
    _write_matrix(["prediction"], pred.reshape(-1, 1), args.out)
    return 0


def _load_input_for_model(args, m) -> dict[str, np.ndarray]:
    """Input columns for a fitted model; the stored target need not be present."""
    path = Path(args.data)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    if args.units_schema:
        schema = dataio.load_schema(args.units_schema)
        return dataio.load_csv(path, schema).columns
    header, rows = dataio._read_csv_table(path)
    positions = {name: i for i, name in enumerate(header)}
    missing = [c for c in m.input_names if c not in positions]
    if missing:
        raise MissingColumnError(missing)
    columns: dict[str, np.ndarray] = {}
    for name in m.input_names:
        cells = [r[positions[name]].strip() for r in rows]
        if m.kinds.get(name, "numeric") == "categorical":
            columns[name] = np.array(cells, dtype=str)
        else:
            try:
                columns[name] = np.array([float(c) for c in cells])
            except ValueError as exc:
                raise DataError(f"column {name!r}: {exc}") from exc
    return columns


def _cmd_select(args) -> int:
    ds = _load_input(args)
    pool = engineer(ds.columns, ds.kinds, ds.units, _engineering_config(args), seed=args.seed)
    y = np.asarray(ds.y)[pool.row_indices]
    result = select_features(pool, y, SelectionConfig(seed=args.seed), threads=args.threads)
    print(pool.report.to_text())
    if result.empty:
        print("no features selected")
        return 0
    print(f"selected {len(result.selected_keys)}:")
    for key, c in zip(result.selected_keys, result.coef):
        print(f"  {key}  coef={c!r}  votes={result.votes.get(key, 0)}")
    return 0


def _cmd_benchmark(args) -> int:
    ids = [d for d in args.datasets.split(",") if d]
    methods = tuple(m for m in args.methods.split(",") if m)
    for m in methods:
        if m not in bench.METHODS:
            raise DataError(f"unknown method {m!r}; known: {bench.METHODS}")
    cache = Path(args.cache_dir) if args.cache_dir else None
    report = bench.run_benchmark(
        ids, methods, seed=args.seed, folds=args.folds, threads=args.threads, cache_dir=cache
    )
    if args.out:
        run_dir = bench.write_report(report, args.out)
        print(f"report -> {run_dir}")
    else:
        sys.stdout.write(report.to_markdown())
    return 0


def _cmd_report(args) -> int:
    m = dataio.load_model(args.model)
    sys.stdout.write(model_mod.coefficient_report(m).to_text())
    return 0


_COMMANDS = {
    "fetch": _cmd_fetch,
    "fit": _cmd_fit,
    "transform": _cmd_transform,
    "predict": _cmd_predict,
    "select": _cmd_select,
    "benchmark": _cmd_benchmark,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConvergenceError as exc:
        print(f"featforge: numeric non-convergence: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"featforge: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
