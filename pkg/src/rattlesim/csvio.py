"""CSV emission with round-trip exact numbers.

Floats are written with ``repr`` (shortest string that parses back to the
same double, at most 17 significant digits). NaN is written as an empty field.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    return "" if math.isnan(v) else repr(v)


def parse(field: str):
    return math.nan if field == "" else float(field)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """(header, rows) with every field parsed as float (empty -> NaN)."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [[parse(f) for f in row] for row in r]
