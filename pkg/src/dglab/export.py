"""Deterministic CSV, JSON and binary writers."""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .geometry import Grid
from .solver import ScalarField

MAGIC = b"DGL1"
HEADER = struct.Struct("<4sIII")


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if v is None:
        return ""
    return str(v)


def plain(obj: Any) -> Any:
    """JSON-ready copy: numpy types unwrapped, non-finite floats as strings."""
    if is_dataclass(obj) and not isinstance(obj, type):
        obj = asdict(obj)
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else _fmt(v)
    return obj


def write_json(path: Path, obj: Any) -> Path:
    path = Path(path)
    path.write_text(json.dumps(plain(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path: Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_csv(path: Path, rows: Iterable[dict], columns: Sequence[str]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])
    return path


def read_csv(path: Path) -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_solution_csv(path: Path, u: ScalarField) -> Path:
    """Long format ``t,x,u`` in row-major (time, space) order."""
    g = u.grid
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("t,x,u\n")
        for j in range(g.nt):
            t = repr(float(g.t[j]))
            fh.writelines(f"{t},{float(x)!r},{float(v)!r}\n" for x, v in zip(g.x, u.values[j]))
    return path


def write_solution_bin(path: Path, u: ScalarField) -> Path:
    """Header ``DGL1, nx, nt, 0`` (little-endian uint32) then ``u[t, x]`` as float64."""
    g = u.grid
    path = Path(path)
    data = np.ascontiguousarray(u.values, dtype="<f8")
    path.write_bytes(HEADER.pack(MAGIC, g.nx, g.nt, 0) + data.tobytes())
    return path


def read_solution_bin(path: Path, grid: Grid | None = None) -> np.ndarray:
    raw = Path(path).read_bytes()
    magic, nx, nt, _ = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError("not a solution file")
    if grid is not None and (grid.nx, grid.nt) != (nx, nt):
        raise ValueError("grid size mismatch")
    return np.frombuffer(raw, dtype="<f8", offset=HEADER.size).reshape(nt, nx).copy()
