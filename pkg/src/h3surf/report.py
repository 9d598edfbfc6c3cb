"""Report documents and their deterministic serialization.

JSON floats are written with 17 significant digits and keys are sorted, so the
same analysis always produces the same bytes. CSV floats use the shortest
round-trip representation. All writes go through a temporary file in the
destination directory followed by an atomic rename.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__

CSV_COLUMNS = ("u", "v", "x", "y", "z", "E", "F", "G", "W2", "H", "lap_r1", "lap_r2", "lap_r3")


class _Float17:
    """Marker wrapping a float so the encoder emits it verbatim."""

    __slots__ = ("text",)

    def __init__(self, x: float):
        self.text = format(x, ".17g")


def _normalize(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_normalize(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        if x == 0.0:
            x = 0.0  # drop the sign of negative zero
        return _Float17(x)
    return obj


def _encode(obj: Any, out: list[str], indent: int, level: int) -> None:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(obj, _Float17):
        out.append(obj.text)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, k in enumerate(sorted(obj)):
            out.append(("," if i else "") + pad + json.dumps(k) + ": ")
            _encode(obj[k], out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[")
        for i, v in enumerate(obj):
            out.append(("," if i else "") + pad)
            _encode(v, out, indent, level + 1)
        out.append(end + "]")
    else:
        out.append(json.dumps(obj))


def dumps(obj: Any, indent: int = 2) -> str:
    """Deterministic JSON: sorted keys, '%.17g' floats, NaN/inf as null."""
    out: list[str] = []
    _encode(_normalize(obj), out, indent, 0)
    return "".join(out) + "\n"


@dataclass
class ReportDocument:
    command: str
    chart: Optional[dict] = None
    grid: Optional[dict] = None
    results: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    version: str = __version__

    def as_dict(self) -> dict:
        out = {"version": self.version, "command": self.command, "results": self.results}
        # one schema for every subcommand; absent sections are omitted
        if self.chart is not None:
            out["chart"] = self.chart
        if self.grid is not None:
            out["grid"] = self.grid
        out["timing"] = self.timing
        return out

    def to_json(self) -> str:
        return dumps(self.as_dict())


def table_to_csv(columns: dict[str, np.ndarray], order=None) -> str:
    order = list(order or columns.keys())
    cols = [np.asarray(columns[k], dtype=float).ravel() for k in order]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(order)
    for row in zip(*cols):
        w.writerow([repr(float(v) + 0.0) for v in row])  # + 0.0 clears negative zero
    return buf.getvalue()


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
