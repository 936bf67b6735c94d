"""Stable JSON, JSONL and CSV writers.

Floats are written with 17 significant digits, which round-trips every
double exactly and makes repeated runs byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _plain(obj: Any) -> Any:
    if hasattr(obj, "to_json"):
        return obj.to_json()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    return obj


def _encode(obj: Any, indent: int | None, level: int) -> str:
    obj = _plain(obj)
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, dict):
        items = [json.dumps(str(k)) + ": " + _encode(v, indent, level + 1) for k, v in obj.items()]
        return _wrap("{", "}", items, indent, level)
    if isinstance(obj, list):
        items = [_encode(v, indent, level + 1) for v in obj]
        if all(not isinstance(_plain(v), (dict, list)) for v in obj):
            # flat lists of scalars stay on one line
            return _wrap("[", "]", items, None, level)
        return _wrap("[", "]", items, indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _wrap(open_: str, close: str, items: list[str], indent: int | None, level: int) -> str:
    if not items:
        return open_ + close
    if indent is None:
        return open_ + ", ".join(items) + close
    pad = " " * (indent * (level + 1))
    return open_ + "\n" + ",\n".join(pad + it for it in items) + "\n" + " " * (indent * level) + close


def dumps(obj: Any, indent: int | None = 2) -> str:
    """Serialize nested dicts, lists, numbers and arrays."""
    return _encode(obj, indent, 0)


def write_json(path, obj: Any) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def read_json(path) -> Any:
    return json.loads(Path(path).read_text())


def write_jsonl(path, records: Iterable[Any]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(dumps(rec, indent=None) + "\n")


def read_jsonl(path) -> list[Any]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def matrix_csv(row_label: str, rows: list, cols: list, values) -> str:
    """CSV matrix with a header row of column keys and a first column of row keys."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([row_label] + [str(c) for c in cols])
    for r, vals in zip(rows, values):
        w.writerow([str(r)] + [format_float(v) for v in vals])
    return buf.getvalue()
