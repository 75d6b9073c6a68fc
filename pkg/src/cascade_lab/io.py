"""Plain-text outputs: CSV tables, JSON summaries, pools and run manifests.

Reals are written with 17 significant digits, which round-trips every
64-bit float, and files always use LF line endings. Empty bins and other
undefined values are written as empty CSV fields (``null`` in JSON).
"""

from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .errors import InputError


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        return "" if math.isnan(x) else "%.17g" % x
    return str(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if not math.isfinite(x) else x
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


@dataclass
class Table:
    header: list
    rows: list

    def text(self) -> str:
        lines = [",".join(self.header)]
        lines += [",".join(fmt(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"


@dataclass
class Outputs:
    """Named tables and JSON documents produced by one experiment."""

    tables: dict = field(default_factory=dict)
    documents: dict = field(default_factory=dict)

    def write(self, directory) -> list[Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, table in self.tables.items():
            written.append(write_text(out / f"{name}.csv", table.text()))
        for name, doc in self.documents.items():
            written.append(write_text(out / f"{name}.json", dumps(doc)))
        return written


def write_text(path, text: str) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_csv(path, header, rows) -> Path:
    return write_text(path, Table(list(header), list(rows)).text())


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        data = list(csv.reader(fh))
    if not data:
        raise InputError(f"{path} is empty")
    return data[0], data[1:]


def write_json(path, obj) -> Path:
    return write_text(path, dumps(obj))


def save_pool(pool, path) -> Path:
    """Single-column CSV plus a ``.json`` sidecar holding the metadata."""
    path = Path(path)
    write_csv(path, ["value"], ([v] for v in pool.values))
    write_json(path.with_suffix(".json"), pool.meta())
    return path


def load_pool(path):
    from .cascade import SamplePool

    path = Path(path)
    header, rows = read_csv(path)
    if header != ["value"]:
        raise InputError(f"{path}: expected a single 'value' column")
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    values = np.array([float(r[0]) for r in rows])
    return SamplePool(values, meta["b"], meta["generation"], meta["inner_iterations"],
                      meta["source"], meta.get("seed"), meta.get("renormalized", True))


def manifest(command: str, config: dict) -> dict:
    """Config echo plus library versions; excludes anything run-specific."""
    import scipy

    return {
        "command": command,
        "config": config,
        "versions": {
            "cascade_lab": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "backend": _backend.backend_name(),
    }
