"""CSV, JSON and binary export of sampled fields and trajectories.

Binary layout (little-endian)::

    8 bytes   magic b"GKDVTRJ1"
    uint64    n_points
    float64   length
    uint64    count
    float64[count]            snapshot times
    float64[count * n_points] states, row-major
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .solver import Trajectory
from .spectral import Field, Grid, make_grid

MAGIC = b"GKDVTRJ1"
_HEADER = struct.Struct("<8sQdQ")


def _as_arrays(obj, t: float | None = None):
    if isinstance(obj, Trajectory):
        return obj.grid, np.asarray(obj.times, dtype=float), np.atleast_2d(obj.states)
    if isinstance(obj, Field):
        return obj.grid, np.array([0.0 if t is None else float(t)]), obj.samples[None, :]
    raise InvalidArgumentError(f"cannot export {type(obj).__name__}")


def write_csv(obj, path, t: float | None = None) -> Path:
    """Rows ``t,x,u`` with 17 significant digits, one per grid point and snapshot."""
    grid, times, states = _as_arrays(obj, t)
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "u"])
        for ti, row in zip(times, states):
            for xj, uj in zip(grid.x, row):
                writer.writerow([f"{ti:.17g}", f"{xj:.17g}", f"{uj:.17g}"])
    return path


def read_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]


def write_json(obj, path, t: float | None = None) -> Path:
    grid, times, states = _as_arrays(obj, t)
    payload = {
        "n_points": grid.n_points,
        "length": grid.length,
        "x": grid.x.tolist(),
        "times": times.tolist(),
        "states": states.tolist(),
    }
    path = Path(path)
    path.write_text(json.dumps(payload))
    return path


def write_binary(obj, path, t: float | None = None) -> Path:
    grid, times, states = _as_arrays(obj, t)
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, grid.n_points, grid.length, len(times)))
        fh.write(times.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(states, dtype="<f8").tobytes())
    return path


def read_binary(path) -> tuple[Grid, np.ndarray, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise InvalidArgumentError("file too short for a trajectory header")
    magic, n, length, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise InvalidArgumentError(f"bad magic {magic!r}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != count * (n + 1):
        raise InvalidArgumentError("trajectory body has the wrong size")
    return make_grid(int(n), float(length)), body[:count].copy(), body[count:].reshape(count, n).copy()


WRITERS = {"csv": write_csv, "json": write_json, "bin": write_binary}


def export(obj, path, fmt: str, t: float | None = None) -> Path:
    try:
        writer = WRITERS[fmt]
    except KeyError:
        raise InvalidArgumentError(f"unknown format {fmt!r}; use one of {sorted(WRITERS)}") from None
    return writer(obj, path, t)
