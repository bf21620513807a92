"""Read result CSVs back and render them as aligned text tables."""

from __future__ import annotations

import csv
import io
from typing import Dict, List, Tuple

from .errors import FormatError
from .experiments import CSV_COLUMNS

_NUMERIC = ("lat_min_ms", "lat_mean_ms", "lat_median_ms", "lat_p95_ms", "lat_max_ms", "deadline_met_fraction")
_INTEGER = ("frs_count", "robots", "samples", "seed")


def read_results(text: str) -> Tuple[Dict[str, str], List[Dict[str, str]]]:
    metadata: Dict[str, str] = {}
    rows: List[Dict[str, str]] = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            metadata[key.strip()] = value.strip()
            continue
        fields = next(csv.reader(io.StringIO(line)))
        if not header_seen:
            if fields != CSV_COLUMNS:
                raise FormatError(f"line {lineno}: not a result CSV header")
            header_seen = True
            continue
        if len(fields) != len(CSV_COLUMNS):
            raise FormatError(f"line {lineno}: expected {len(CSV_COLUMNS)} fields, found {len(fields)}")
        row = dict(zip(CSV_COLUMNS, fields))
        try:
            for k in _NUMERIC:
                if row[k]:
                    float(row[k])
            for k in _INTEGER:
                int(row[k])
        except ValueError:
            raise FormatError(f"line {lineno}: malformed number") from None
        rows.append(row)
    if not header_seen:
        raise FormatError("line 1: missing result CSV header")
    return metadata, rows


_TABLE = [
    ("arch", "arch"), ("frs", "frs_count"), ("robots", "robots"), ("target", "target"),
    ("mean ms", "lat_mean_ms"), ("median ms", "lat_median_ms"), ("p95 ms", "lat_p95_ms"),
    ("min ms", "lat_min_ms"), ("max ms", "lat_max_ms"), ("on time", "deadline_met_fraction"),
    ("n", "samples"), ("mix", "resolution_mix"),
]


def _cell(key, value):
    if key in _NUMERIC and value:
        return f"{float(value):.3f}" if key != "deadline_met_fraction" else f"{float(value):.1%}"
    return value or "-"


def render(text: str) -> str:
    metadata, rows = read_results(text)
    out = []
    if metadata:
        out.append("  ".join(f"{k}={metadata[k]}" for k in sorted(metadata)))
    if not rows:
        out.append("no rows")
        return "\n".join(out) + "\n"
    experiments = []
    for r in rows:
        if r["experiment"] not in experiments:
            experiments.append(r["experiment"])
    for exp in experiments:
        subset = [r for r in rows if r["experiment"] == exp]
        grid = [[title for title, _ in _TABLE]]
        grid += [[_cell(key, r[key]) for _, key in _TABLE] for r in subset]
        widths = [max(len(row[i]) for row in grid) for i in range(len(_TABLE))]
        out.append("")
        out.append(f"experiment {exp}")
        for i, row in enumerate(grid):
            cells = [c.rjust(w) if _TABLE[j][1] in _NUMERIC + _INTEGER else c.ljust(w)
                     for j, (c, w) in enumerate(zip(row, widths))]
            out.append("  ".join(cells).rstrip())
            if i == 0:
                out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"
