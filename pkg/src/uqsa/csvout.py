"""Deterministic CSV serialization."""

from __future__ import annotations

import csv
import io
import math

import numpy as np


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return format(v + 0.0, ".17g")  # folds -0.0 into 0
    return str(v)


def render(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        if len(r) != len(header):
            raise ValueError("row length does not match the header")
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()
