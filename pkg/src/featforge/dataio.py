"""Dataset ingestion, benchmark acquisition over HTTP, model persistence.

A dataset on disk is a CSV (RFC-4180 subset, UTF-8, "." decimal) plus a
sidecar schema in JSON:

    {"target": "strength",
     "columns": [{"name": "cement", "kind": "numeric", "unit": "kg/m^3"},
                 {"name": "mix", "kind": "categorical"},
                 {"name": "strength", "kind": "numeric"}]}

`kind` is "numeric" or "categorical"; `unit` is optional and uses the same
grammar as the dimensional analysis module ("m/s^2", "kg*m^-3", "1").
Columns present in the CSV but absent from the schema are ignored.
"""

from __future__ import annotations

import hashlib
import json
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dimensions import parse_unit
from .errors import DataError, SchemaError, VersionError

MODEL_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# schema and datasets


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str = "numeric"
    unit: str | None = None


@dataclass(frozen=True)
class Schema:
    """Sidecar description of a CSV: per-column kinds/units plus the target."""

    target: str
    specs: tuple[ColumnSpec, ...]

    def __post_init__(self):
        names = [s.name for s in self.specs]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate column names in schema: {dupes}")
        if self.target not in names:
            raise SchemaError(f"target {self.target!r} is not a schema column")
        for s in self.specs:
            if s.kind not in ("numeric", "categorical"):
                raise SchemaError(f"column {s.name!r} has unknown kind {s.kind!r}")
            if s.unit is not None:
                parse_unit(s.unit)  # raises SchemaError on bad grammar


@dataclass
class Dataset:
    """Validated tabular data: named input columns plus one target.

    Numeric columns are float64 arrays, categorical columns arrays of
    strings. `n` and `d` count rows and input columns (the target is not an
    input).
    """

    name: str
    columns: dict[str, np.ndarray]
    kinds: dict[str, str]
    units: dict[str, str | None]
    target: str
    y: np.ndarray
    provenance: str = ""

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return len(self.columns)


def load_schema(path: str | Path) -> Schema:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "target" not in raw or "columns" not in raw:
        raise SchemaError(f"schema {path} needs 'target' and 'columns' entries")
    specs = []
    for entry in raw["columns"]:
        unknown = set(entry) - {"name", "kind", "unit"}
        if unknown:
            raise SchemaError(f"schema column {entry.get('name')!r} has unknown fields {sorted(unknown)}")
        specs.append(ColumnSpec(entry["name"], entry.get("kind", "numeric"), entry.get("unit")))
    return Schema(target=str(raw["target"]), specs=tuple(specs))


def save_schema(schema: Schema, path: str | Path) -> None:
    cols = []
    for s in schema.specs:
        entry: dict = {"name": s.name, "kind": s.kind}
        if s.unit is not None:
            entry["unit"] = s.unit
        cols.append(entry)
    Path(path).write_text(
        json.dumps({"target": schema.target, "columns": cols}, indent=1) + "\n",
        encoding="utf-8",
    )


def _read_csv_table(path: Path) -> tuple[list[str], list[list[str]]]:
    import csv

    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    header = [h.strip() for h in header]
    width = len(header)
    for i, row in enumerate(rows, start=2):
        if len(row) != width:
            raise DataError(f"{path} line {i}: expected {width} fields, got {len(row)}")
    return header, rows


def infer_schema(path: str | Path, target: str | None = None) -> Schema:
    """Schema with no units: numeric unless a cell refuses to parse; target
    defaults to the last column."""
    header, rows = _read_csv_table(Path(path))
    specs = []
    for j, name in enumerate(header):
        kind = "numeric"
        for row in rows:
            cell = row[j].strip()
            if cell == "":
                continue
            try:
                float(cell)
            except ValueError:
                kind = "categorical"
                break
        specs.append(ColumnSpec(name, kind))
    chosen = target if target is not None else header[-1]
    return Schema(target=chosen, specs=tuple(specs))


def load_csv(path: str | Path, schema: Schema) -> Dataset:
    """Parse and validate one CSV against its schema.

    Unparseable numeric cells are collected and reported with row/column
    coordinates (up to ten shown) instead of failing one at a time.
    """
    path = Path(path)
    header, rows = _read_csv_table(path)
    positions = {name: i for i, name in enumerate(header)}
    missing = [s.name for s in schema.specs if s.name not in positions]
    if missing:
        raise SchemaError(f"{path} is missing schema columns: {missing}")

    bad: list[str] = []
    columns: dict[str, np.ndarray] = {}
    kinds: dict[str, str] = {}
    units: dict[str, str | None] = {}
    target_values: np.ndarray | None = None
    for spec in schema.specs:
        j = positions[spec.name]
        cells = [row[j].strip() for row in rows]
        if spec.kind == "categorical":
            values = np.array(cells, dtype=str)
        else:
            parsed = np.empty(len(cells))
            for i, cell in enumerate(cells):
                try:
                    parsed[i] = float(cell)
                except ValueError:
                    parsed[i] = np.nan
                    if len(bad) < 10:
                        bad.append(f"row {i + 2}, column {spec.name!r}: {cell!r}")
            if np.isnan(parsed).any() and not bad:
                bad.append(f"column {spec.name!r} has non-finite values")
            values = parsed
        if spec.name == schema.target:
            if spec.kind == "categorical":
                raise SchemaError("target column must be numeric")
            target_values = values
        else:
            columns[spec.name] = values
            kinds[spec.name] = spec.kind
            units[spec.name] = spec.unit
    if bad:
        raise DataError(f"{path} has unparseable numeric cells: " + "; ".join(bad))
    assert target_values is not None
    if not np.isfinite(target_values).all():
        raise DataError(f"{path}: target {schema.target!r} has non-finite values")
    return Dataset(
        name=path.stem,
        columns=columns,
        kinds=kinds,
        units=units,
        target=schema.target,
        y=target_values,
        provenance=f"loaded from {path.name}",
    )


# ---------------------------------------------------------------------------
# benchmark acquisition


@dataclass(frozen=True)
class RemoteFile:
    url: str
    filename: str
    sha256: str | None = None  # None: record on first fetch, verify after
    alt_filenames: tuple[str, ...] = ()  # user-supplied substitutes, tried before downloading


@dataclass(frozen=True)
class DatasetManifest:
    """Where a benchmark dataset comes from and what shape it must have."""

    dataset_id: str
    files: tuple[RemoteFile, ...]
    expected_n: int
    expected_d: int
    note: str = ""


_BUNDLED = Path(__file__).parent / "data"

MANIFESTS: dict[str, DatasetManifest] = {
    "diabetes": DatasetManifest(
        "diabetes",
        (
            RemoteFile(
                url="bundled://diabetes.csv",
                filename="diabetes.csv",
                sha256=None,  # pinned at bundle time in diabetes.csv.sha256
            ),
        ),
        expected_n=442,
        expected_d=10,
        note="bundled copy; disease progression one year after baseline",
    ),
    "boston": DatasetManifest(
        "boston",
        (
            RemoteFile(
                url="http://lib.stat.cmu.edu/datasets/boston",
                filename="boston.txt",
            ),
        ),
        expected_n=506,
        expected_d=13,
        note="median home value; two physical lines per record",
    ),
    "concrete": DatasetManifest(
        "concrete",
        (
            RemoteFile(
                url="https://archive.ics.uci.edu/ml/machine-learning-databases/concrete/compressive/Concrete_Data.xls",
                filename="concrete.xls",
                alt_filenames=("concrete.csv",),
            ),
        ),
        expected_n=1030,
        expected_d=8,
        note="compressive strength; upstream ships xls",
    ),
    "airfoil": DatasetManifest(
        "airfoil",
        (
            RemoteFile(
                url="https://archive.ics.uci.edu/ml/machine-learning-databases/00291/airfoil_self_noise.dat",
                filename="airfoil.dat",
            ),
        ),
        expected_n=1503,
        expected_d=5,
        note="scaled sound pressure level; tab-separated, no header",
    ),
    "wine": DatasetManifest(
        "wine",
        (
            RemoteFile(
                url="https://archive.ics.uci.edu/ml/machine-learning-databases/wine-quality/winequality-red.csv",
                filename="winequality-red.csv",
            ),
            RemoteFile(
                url="https://archive.ics.uci.edu/ml/machine-learning-databases/wine-quality/winequality-white.csv",
                filename="winequality-white.csv",
            ),
        ),
        expected_n=6497,
        expected_d=12,
        note="red and white halves concatenated with a color column",
    ),
}


def default_cache_dir() -> Path:
    import os

    override = os.environ.get("FEATFORGE_DATA_DIR")
    if override:
        return Path(override)
    return Path.home() / ".cache" / "featforge"


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _download(url: str, dest: Path, attempts: int = 3) -> None:
    last: Exception | None = None
    for attempt in range(attempts):
        if attempt:
            time.sleep(2.0**attempt)
        try:
            req = urllib.request.Request(url, headers={"User-Agent": "featforge-fetch"})
            with urllib.request.urlopen(req, timeout=60) as resp:
                payload = resp.read()
            tmp = dest.with_suffix(dest.suffix + ".part")
            tmp.write_bytes(payload)
            tmp.replace(dest)  # atomic on the same filesystem
            return
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            last = exc
    raise DataError(f"could not download {url} after {attempts} attempts: {last}")


def _expected_sha(remote: RemoteFile, cache_dir: Path) -> str | None:
    if remote.sha256:
        return remote.sha256
    pinned = _BUNDLED / (remote.filename + ".sha256")
    if pinned.exists():
        return pinned.read_text().split()[0]
    recorded = cache_dir / (remote.filename + ".sha256")
    if recorded.exists():
        return recorded.read_text().split()[0]
    return None


def fetch_dataset(manifest: DatasetManifest, cache_dir: Path | None = None) -> list[Path]:
    """Local paths for every file of a manifest, downloading when needed.

    Checksums: a pinned digest is verified on every use. Without one the
    digest of the first successful fetch is recorded next to the cache file
    and later loads must match it (first use is trusted, drift is not).
    A corrupt file is discarded rather than returned.
    """
    cache_dir = cache_dir or default_cache_dir()
    cache_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    for remote in manifest.files:
        if remote.url.startswith("bundled://"):
            local = _BUNDLED / remote.url[len("bundled://"):]
            if not local.exists():
                raise DataError(f"bundled file {local} is missing from the package")
            expected = _expected_sha(remote, cache_dir)
            if expected:
                got = _sha256(local)
                if got != expected:
                    raise DataError(
                        f"checksum mismatch for bundled {remote.filename}: expected {expected}, got {got}"
                    )
            paths.append(local)
            continue
        local = cache_dir / remote.filename
        alt = next((cache_dir / a for a in remote.alt_filenames if (cache_dir / a).exists()), None)
        if alt is not None and not local.exists():
            paths.append(alt)
            continue
        expected = _expected_sha(remote, cache_dir)
        if not local.exists():
            _download(remote.url, local)
        got = _sha256(local)
        if expected is None:
            (cache_dir / (remote.filename + ".sha256")).write_text(got + "\n")
        elif got != expected:
            local.unlink()
            raise DataError(
                f"checksum mismatch for {remote.filename}: expected {expected}, got {got}; file discarded"
            )
        paths.append(local)
    return paths


def load_dataset(dataset_id: str, cache_dir: Path | None = None) -> Dataset:
    """Fetch (or reuse) a benchmark dataset and normalize it to a Dataset."""
    if dataset_id not in MANIFESTS:
        raise DataError(f"unknown dataset {dataset_id!r}; known: {sorted(MANIFESTS)}")
    manifest = MANIFESTS[dataset_id]
    paths = fetch_dataset(manifest, cache_dir)
    ds = _NORMALIZERS[dataset_id](paths)
    if ds.n != manifest.expected_n or ds.d != manifest.expected_d:
        raise DataError(
            f"{dataset_id}: normalized shape ({ds.n}, {ds.d}) does not match "
            f"expected ({manifest.expected_n}, {manifest.expected_d})"
        )
    return ds


def _numeric_dataset(name, header, matrix, target, note) -> Dataset:
    y = matrix[:, header.index(target)]
    columns = {}
    for j, col in enumerate(header):
        if col != target:
            columns[col] = matrix[:, j]
    return Dataset(
        name=name,
        columns=columns,
        kinds={c: "numeric" for c in columns},
        units={c: None for c in columns},
        target=target,
        y=y,
        provenance=note,
    )


def _load_diabetes(paths: list[Path]) -> Dataset:
    schema = infer_schema(paths[0], target="target")
    ds = load_csv(paths[0], schema)
    ds.name = "diabetes"
    ds.provenance = MANIFESTS["diabetes"].note
    return ds


def _load_boston(paths: list[Path]) -> Dataset:
    # 22-line preamble, then each record spread over two physical lines
    text = paths[0].read_text(encoding="utf-8", errors="replace").splitlines()
    tokens: list[str] = []
    for line in text[22:]:
        tokens.extend(line.split())
    values = np.array([float(t) for t in tokens])
    if values.size % 14:
        raise DataError(f"boston: token count {values.size} is not a multiple of 14")
    matrix = values.reshape(-1, 14)
    header = [
        "crim", "zn", "indus", "chas", "nox", "rm", "age",
        "dis", "rad", "tax", "ptratio", "b", "lstat", "medv",
    ]
    return _numeric_dataset("boston", header, matrix, "medv", MANIFESTS["boston"].note)


def _load_concrete(paths: list[Path]) -> Dataset:
    header = [
        "cement", "slag", "ash", "water", "superplasticizer",
        "coarse_aggregate", "fine_aggregate", "age", "strength",
    ]
    csv_export = paths[0].with_name("concrete.csv")
    if csv_export.exists():
        lines = [ln for ln in csv_export.read_text(encoding="utf-8-sig").splitlines() if ln.strip()]
        matrix = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    else:
        try:
            import xlrd  # optional extra; upstream only publishes xls
        except ImportError:
            raise DataError(
                "concrete ships as .xls; install the 'excel' extra (xlrd) or place "
                "a CSV export named concrete.csv in the cache directory"
            ) from None
        book = xlrd.open_workbook(paths[0])
        sheet = book.sheet_by_index(0)
        matrix = np.array(
            [[float(sheet.cell_value(i, j)) for j in range(8 + 1)] for i in range(1, sheet.nrows)]
        )
    return _numeric_dataset("concrete", header, matrix, "strength", MANIFESTS["concrete"].note)


def _load_airfoil(paths: list[Path]) -> Dataset:
    rows = []
    for line in paths[0].read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append([float(tok) for tok in line.split()])
    matrix = np.array(rows)
    header = ["frequency", "angle_of_attack", "chord_length", "velocity", "displacement_thickness", "sound_pressure"]
    return _numeric_dataset("airfoil", header, matrix, "sound_pressure", MANIFESTS["airfoil"].note)


def _load_wine(paths: list[Path]) -> Dataset:
    def read_semicolon(path: Path) -> tuple[list[str], np.ndarray]:
        lines = path.read_text(encoding="utf-8").splitlines()
        header = [h.strip().strip('"').replace(" ", "_") for h in lines[0].split(";")]
        data = np.array([[float(v) for v in line.split(";")] for line in lines[1:] if line.strip()])
        return header, data

    header_r, red = read_semicolon(paths[0])
    header_w, white = read_semicolon(paths[1])
    if header_r != header_w:
        raise DataError("wine halves disagree on columns")
    matrix = np.vstack([red, white])
    color = np.array(["red"] * len(red) + ["white"] * len(white))
    target = "quality"
    columns: dict[str, np.ndarray] = {}
    for j, col in enumerate(header_r):
        if col != target:
            columns[col] = matrix[:, j]
    columns["color"] = color
    kinds = {c: "numeric" for c in columns}
    kinds["color"] = "categorical"
    return Dataset(
        name="wine",
        columns=columns,
        kinds=kinds,
        units={c: None for c in columns},
        target=target,
        y=matrix[:, header_r.index(target)],
        provenance=MANIFESTS["wine"].note,
    )


_NORMALIZERS = {
    "diabetes": _load_diabetes,
    "boston": _load_boston,
    "concrete": _load_concrete,
    "airfoil": _load_airfoil,
    "wine": _load_wine,
}


# ---------------------------------------------------------------------------
# model persistence


def save_model(model, path: str | Path) -> None:
    """Write a fitted model as versioned JSON; see the README for the schema."""
    payload = model.to_payload()
    payload["format_version"] = MODEL_FORMAT_VERSION
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def load_model(path: str | Path):
    from .model import FittedModel

    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"model file {path} is corrupt: {exc}") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise DataError(f"model file {path} has no format_version field")
    version = payload["format_version"]
    if version > MODEL_FORMAT_VERSION:
        raise VersionError(
            f"model file {path} has format version {version}; this build reads up to {MODEL_FORMAT_VERSION}"
        )
    return FittedModel.from_payload(payload)
