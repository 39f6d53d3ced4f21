"""CSV ingestion and emission, report (de)serialization and plot tables."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import InputError
from .geometry import PointCloud

PLOT_COLUMNS = (
    "label", "percent", "std_scale", "raw_scale", "k", "T", "null_mean", "lower", "upper",
    "relation", "accepted_k", "effective_dimension",
)


def fmt(x) -> str:
    """17 significant digits, enough for an exact float round trip."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def ingest_csv(path, delimiter: str = ",", header: bool = False) -> PointCloud:
    """Read a rectangular numeric CSV into a point cloud (rows are observations)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    return parse_csv(text, delimiter=delimiter, header=header, source=str(path))


def parse_csv(text: str, delimiter: str = ",", header: bool = False, source: str = "<string>") -> PointCloud:
    rows = [(i + 1, r) for i, r in enumerate(csv.reader(io.StringIO(text), delimiter=delimiter))
            if r and any(c.strip() for c in r)]
    if header and rows:
        rows = rows[1:]
    if not rows:
        raise InputError(f"{source}: no data rows")
    width = len(rows[0][1])
    data = np.empty((len(rows), width))
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise InputError(f"{source}: line {lineno} has {len(row)} columns, expected {width}")
        for c, cell in enumerate(row):
            try:
                data[r, c] = float(cell)
            except ValueError:
                raise InputError(
                    f"{source}: non-numeric cell {cell.strip()!r} at line {lineno}, column {c + 1}"
                ) from None
    if len(rows) < 3:
        raise InputError(f"{source}: need at least 3 observations, got {len(rows)}")
    return PointCloud(data)


def write_csv(cloud, path=None, delimiter: str = ",") -> str:
    """Write coordinates with 17 significant digits; returns the text."""
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud)
    text = "".join(delimiter.join(fmt(v) for v in row) + "\n" for row in pts)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _clean(obj):
    # JSON has no NaN; numpy scalars and arrays become plain Python values
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if math.isnan(f) else f
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_report(data: dict) -> str:
    return json.dumps(_clean(data), indent=2, allow_nan=False) + "\n"


def load_report(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read report {path}: {exc}") from None


def plot_tables(report: dict) -> dict:
    """Flat per-order tables from a report dict: ``{k: tsv_text}``.

    Every number is copied from the report, never recomputed.
    """
    grid = report["grid"]
    t = report["t_profile"]
    nulls = {int(k): v for k, v in report["nulls"].items()}
    verdicts = report["profile"]["verdicts"]
    tables = {}
    for j, k in enumerate(t["orders"]):
        lines = ["\t".join(PLOT_COLUMNS)]
        band = nulls.get(k)
        for g, label in enumerate(grid["labels"]):
            v = verdicts[g]
            rel = next((e["relation"] for e in v["tried"] if e["k"] == k), "")
            if band is not None:
                b = band["labels"].index(label)
                mean, lower, upper = band["mean"][b], band["lower"][b], band["upper"][b]
            else:
                mean = lower = upper = None
            lines.append("\t".join([
                label,
                fmt(grid["percents"][g]),
                fmt(grid["standardized"][g]),
                fmt(grid["raw"][g]),
                str(k),
                fmt(t["values"][j][g]),
                fmt(mean),
                fmt(lower),
                fmt(upper),
                rel,
                "" if v["accepted_k"] is None else str(v["accepted_k"]),
                fmt(v["effective_dimension"]),
            ]))
        tables[k] = "\n".join(lines) + "\n"
    return tables


def write_plot_tables(report: dict, out_dir) -> list:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, text in plot_tables(report).items():
        p = out_dir / f"T{k}.tsv"
        p.write_text(text, encoding="utf-8")
        paths.append(p)
    return paths
