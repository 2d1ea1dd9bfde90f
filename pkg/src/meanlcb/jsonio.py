"""Deterministic serialization helpers.

Every number that leaves the package is rounded to nine significant
digits, which is comfortably below any solver tolerance while keeping
output byte-identical across runs and platforms.  Infinity serializes as
the string ``"inf"`` because JSON has no spelling for it.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

__all__ = ["round9", "jsonable", "dumps", "csv_text"]


def round9(x: float) -> float:
    """Round to 9 significant digits; normalizes ``-0.0`` to ``0.0``."""
    x = float(x)
    if math.isinf(x):
        return x
    if math.isnan(x):
        raise ValueError("NaN has no serialized form")
    y = float(f"{x:.9g}")
    return 0.0 if y == 0.0 else y


def jsonable(obj):
    """Recursively convert to plain JSON types with rounded floats."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = round9(float(obj))
        return "inf" if math.isinf(x) else x
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """Stable JSON text: converted via :func:`jsonable`, sorted keys."""
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


def _cell(v) -> str:
    if isinstance(v, float):
        v = round9(v)
        if math.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def csv_text(header: list[str], rows: list[list]) -> str:
    """CSV with the same number formatting rules as the JSON output."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()
