"""Delimited run outputs with fixed, versioned schemas.

Three CSV trace files plus a line-delimited explanation log and a JSON run
summary. All serialization is deterministic: fixed column order, shortest
round-trip float text, no timestamps.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

SCHEMA_VERSION = 1

TTI_TRACE = "tti_trace.csv"
INTRA_TRACE = "intra_windows.csv"
INTER_TRACE = "inter_windows.csv"
EXPLANATIONS = "explanations.jsonl"
SUMMARY = "run_summary.json"

TTI_FIELDS = ("tti", "slice", "utilization", "drained_bits")
INTRA_FIELDS = ("window", "tti_start", "slice", "z_rbgs", "tau", "action",
                "u_max", "delta", "r_avg", "d_avg", "qos_fraction", "reward",
                "epsilon", "loss", "steered", "flags")
INTER_FIELDS = ("window", "tti_start", "action", "z_embb", "z_urllc", "z_mmtc",
                "reward", "epsilon", "loss", "steered",
                "r_avg_embb", "r_avg_urllc", "r_avg_mmtc",
                "d_avg_embb", "d_avg_urllc", "d_avg_mmtc",
                "u_max_embb", "u_max_urllc", "u_max_mmtc")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, fieldnames, rows):
    """Write dict rows in the given column order; missing keys become empty."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_cell(row.get(name)) for name in fieldnames])


def read_csv(path) -> list:
    """Rows as dicts of strings, header-driven."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_column(path, column, where=None) -> list:
    """Float values of one column, skipping empty cells.

    `where` is an optional dict of column -> required string value.
    """
    rows = read_csv(path)
    if rows and column not in rows[0]:
        raise KeyError(f"{path}: no column named {column!r}")
    out = []
    for row in rows:
        if where and any(row.get(k) != v for k, v in where.items()):
            continue
        cell = row.get(column, "")
        if cell != "":
            out.append(float(cell))
    return out


def write_explanations(path, records):
    """One JSON object per line, keys sorted; empty file when nothing steered."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")


def read_explanations(path) -> list:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def write_summary(path, summary: dict):
    payload = dict(summary)
    payload["schema_version"] = SCHEMA_VERSION
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_summary(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
