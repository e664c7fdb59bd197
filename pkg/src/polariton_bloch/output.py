"""Serialization of scenario results to CSV and JSON.

Floats are written with 17 significant digits and no timestamps are
recorded, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class OutputError(OSError):
    """Writing results failed; ``path`` names the file involved."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


@dataclass
class Table:
    columns: list
    data: list  # one array per column, equal lengths

    def __post_init__(self):
        if len(self.columns) != len(self.data):
            raise ValueError("one data column per header required")
        lengths = {len(c) for c in self.data}
        if len(lengths) > 1:
            raise ValueError(f"ragged table: column lengths {sorted(lengths)}")

    @property
    def n_rows(self) -> int:
        return len(self.data[0]) if self.data else 0

    @classmethod
    def from_series(cls, series) -> "Table":
        cols = series.columns()
        return cls(list(cols), [np.asarray(v) for v in cols.values()])

    @classmethod
    def from_grid(cls, x, t, density) -> "Table":
        """Flatten a (n_t, n_x) density into x_m, t_s, density rows, t outer."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        density = np.asarray(density, dtype=float)
        if density.shape != (len(t), len(x)):
            raise ValueError(f"density shape {density.shape} != ({len(t)}, {len(x)})")
        return cls(["x_m", "t_s", "density"], [np.tile(x, len(t)), np.repeat(t, len(x)), density.ravel()])


def format_float(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def table_to_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in zip(*table.data):
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats at 17 significant digits; NaN/inf become null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{to_json(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{to_json(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def table_to_json(table: Table) -> str:
    return to_json({"columns": table.columns, "rows": [list(r) for r in zip(*table.data)]}) + "\n"


def render_outputs(tables: dict, summary: dict, fmt: str) -> dict:
    """File name -> text for every output, without touching the disk."""
    files = {}
    for name, table in tables.items():
        if fmt in ("csv", "both"):
            files[f"{name}.csv"] = table_to_csv(table)
        if fmt in ("json", "both"):
            files[f"{name}.json"] = table_to_json(table)
    files["summary.json"] = to_json(summary) + "\n"
    return files


def emit_outputs(tables: dict, summary: dict, fmt: str, directory) -> list:
    """Write tables and the summary into ``directory``; returns the written paths.

    On failure every file written by this call is removed before
    :class:`OutputError` is raised.
    """
    if fmt not in ("csv", "json", "both"):
        raise ValueError(f"unknown format {fmt!r}")
    files = render_outputs(tables, summary, fmt)
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {directory}: {exc.strerror}", directory) from exc
    written = []
    path = directory
    try:
        for name, text in files.items():
            path = directory / name
            with open(path, "w", encoding="utf-8", newline="") as fh:
                written.append(path)
                fh.write(text)
    except OSError as exc:
        for p in written:
            try:
                os.remove(p)
            except OSError:
                pass
        raise OutputError(f"cannot write {path}: {exc.strerror}", path) from exc
    return written
