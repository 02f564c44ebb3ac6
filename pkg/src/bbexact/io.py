"""CSV and JSON input/output for designs, counts and reports."""

from __future__ import annotations

import csv
import io
import json
from importlib import resources
from pathlib import Path

import numpy as np

from bbexact.design import Design

BUNDLED = ("aspergillus.csv",)


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def resolve_data_path(path: str | Path) -> Path:
    """Return ``path`` if it exists, else the bundled dataset of that name."""
    p = Path(path)
    if p.exists():
        return p
    if p.name in BUNDLED:
        return Path(str(resources.files("bbexact") / "data" / p.name))
    raise DataError(f"data file not found: {path}")


def design_csv(design: Design) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run"] + [f"x{f}" for f in range(1, design.m + 1)])
    for r, row in enumerate(design.levels.tolist()):
        w.writerow([r + 1] + row)
    return buf.getvalue()


def design_json(design: Design) -> str:
    return json.dumps(design.to_dict())


def _code_column(name: str, values: list[float]) -> list[int]:
    distinct = sorted(set(values))
    if set(distinct) <= {-1.0, 0.0, 1.0}:
        return [int(v) for v in values]
    if len(distinct) != 3:
        raise DataError(f"level column {name!r} must have three levels, found {len(distinct)}")
    lo, mid, hi = distinct
    if not np.isclose(mid - lo, hi - mid):
        raise DataError(f"level column {name!r} is not equally spaced: {distinct}")
    code = {lo: -1, mid: 0, hi: 1}
    return [code[v] for v in values]


def read_counts(path: str | Path, design: Design) -> np.ndarray:
    """Read a count vector in canonical run order.

    Two layouts are accepted: a single ``count`` column with one row per run in
    canonical order, or ``m`` level columns plus ``count``, which is matched
    row by row against the design and reordered. Equally spaced uncoded levels
    (e.g. 20/60/100) are recoded to -1/0/+1. A ``run`` column is ignored.
    """
    text = Path(path).read_text(encoding="utf-8-sig")
    rows = list(csv.reader(io.StringIO(text.replace("\r\n", "\n"))))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if "count" not in header:
        raise DataError(f"{path}: no 'count' column in header {header}")
    ci = header.index("count")
    level_cols = [i for i, h in enumerate(header) if h not in ("count", "run")]
    for n, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"{path}: row {n} has {len(r)} fields, header has {len(header)}")

    def parse_count(n, cell):
        try:
            v = float(cell)
        except ValueError:
            raise DataError(f"{path}: row {n}: count {cell!r} is not a number") from None
        if v < 0 or v != int(v):
            raise DataError(f"{path}: row {n}: count {cell!r} is not a nonnegative integer")
        return int(v)

    counts = [parse_count(n, r[ci]) for n, r in enumerate(body, start=2)]
    if len(counts) != design.k:
        raise DataError(f"{path}: {len(counts)} data rows, but a {design.m}-factor design has {design.k} runs")
    if not level_cols:
        return np.array(counts, dtype=np.int64)
    if len(level_cols) != design.m:
        raise DataError(f"{path}: {len(level_cols)} level columns, expected {design.m}")
    coded = []
    for i in level_cols:
        try:
            values = [float(r[i]) for r in body]
        except ValueError:
            raise DataError(f"{path}: non-numeric level in column {header[i]!r}") from None
        coded.append(_code_column(header[i], values))
    run_of = {tuple(row): r for r, row in enumerate(design.levels.tolist())}
    y = np.full(design.k, -1, dtype=np.int64)
    for n, (levels, c) in enumerate(zip(zip(*coded), counts), start=2):
        r = run_of.get(tuple(levels))
        if r is None:
            raise DataError(f"{path}: row {n}: levels {list(levels)} are not a run of the design")
        if y[r] >= 0:
            raise DataError(f"{path}: row {n}: run {list(levels)} appears twice")
        y[r] = c
    return y


def histogram_csv(hist) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_lower", "bin_upper", "count"])
    for lo, hi, c in hist:
        w.writerow([repr(lo), repr(hi), c])
    return buf.getvalue()
