"""Trace ingestion and the survival-table arithmetic behind the figures.

This package talks to the simulator only through its comma-separated trace
files, so everything here starts from a path, never an in-process object.
"""

import csv
from pathlib import Path
from typing import Optional

import numpy as np


def read_trace(path) -> tuple:
    """Load one trace file; returns (header tuple, list of row dicts)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: no header row")
        rows = list(reader)
    return tuple(reader.fieldnames), rows


def numeric_column(header, rows, name: str,
                   where: Optional[dict] = None) -> np.ndarray:
    """Parse one column as floats, skipping blank cells.

    `where` filters rows by exact string match on other columns first.
    Unknown columns raise KeyError carrying the column name.
    """
    for needed in (name,) + tuple(where or ()):
        if needed not in header:
            raise KeyError(needed)
    picked = []
    for row in rows:
        if where and any(row[k] != v for k, v in where.items()):
            continue
        cell = row[name]
        if cell != "":
            picked.append(float(cell))
    return np.asarray(picked, dtype=float)


def eccdf_table(samples) -> tuple:
    """Survival fractions P(X > v) over the distinct sample values.

    Returns (values ascending, survival), computed as exact count ratios so
    tables exported here agree bit-for-bit with the simulator's own curves.
    """
    arr = np.sort(np.asarray(list(samples), dtype=float))
    if arr.size == 0:
        raise ValueError("eccdf: empty sample set")
    values, counts = np.unique(arr, return_counts=True)
    survival = (arr.size - np.cumsum(counts)) / arr.size
    return values, survival


def write_points(path, values, survival):
    # repr keeps the exported table lossless for exact comparisons
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("value", "survival"))
        for v, s in zip(values, survival):
            writer.writerow((repr(float(v)), repr(float(s))))
