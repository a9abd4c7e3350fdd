"""Delimited-text and JSON output for fields, trajectories, logs and observation data.

Numbers are written with ``repr``-exact ``%.17g`` formatting, which never
depends on the locale, so a write/read round trip is bitwise lossless.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .grid import Grid2D, GridField

__all__ = [
    "LOG_HEADER",
    "write_field_csv",
    "read_field_csv",
    "write_log_csv",
    "read_log_csv",
    "write_trajectory",
    "write_observation",
    "read_observation",
    "write_metadata",
    "config_hash",
]

LOG_HEADER = ("iter", "residual", "rel_change", "rel_error", "gamma_n", "lambda_n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_field_csv(field: GridField, path) -> Path:
    """Write ``x,y,value`` rows for every interior node (x-major order)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    x, y = field.grid.coords
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("x", "y", "value"))
        for xi, yi, vi in zip(x, y, field.values):
            w.writerow((_fmt(xi), _fmt(yi), _fmt(vi)))
    return path


def read_field_csv(path) -> GridField:
    """Inverse of :func:`write_field_csv`; the grid is inferred from the row count."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n_side = int(round(np.sqrt(data.shape[0])))
    if n_side * n_side != data.shape[0]:
        raise ValueError(f"{path}: {data.shape[0]} rows do not form a square interior grid")
    grid = Grid2D(n_side + 1)
    x, y = grid.coords
    if not (np.allclose(data[:, 0], x, atol=1e-12) and np.allclose(data[:, 1], y, atol=1e-12)):
        raise ValueError(f"{path}: node coordinates are not in the expected order")
    return GridField(grid, data[:, 2])


def write_log_csv(history: Iterable, path) -> Path:
    """Convergence log with columns ``iter,residual,rel_change,rel_error,gamma_n,lambda_n``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_HEADER)
        for row in history:
            w.writerow(tuple(_fmt(getattr(row, k)) for k in LOG_HEADER))
    return path


def read_log_csv(path) -> list[dict]:
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.append({k: (None if v == "" else (int(v) if k == "iter" else float(v))) for k, v in row.items()})
    return out


def write_trajectory(traj, directory, stride: int = 1, prefix: str = "u") -> Path:
    """One field CSV per stored time level (every ``stride``-th) plus ``index.csv`` (t, filename)."""
    if stride < 1:
        raise ValueError("write_trajectory: stride must be >= 1")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    times = traj.timegrid.times
    steps = list(range(0, len(traj), stride))
    if steps[-1] != len(traj) - 1:
        steps.append(len(traj) - 1)
    with (directory / "index.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("t", "filename"))
        for n in steps:
            name = f"{prefix}_{n:05d}.csv"
            write_field_csv(traj[n], directory / name)
            w.writerow((_fmt(times[n]), name))
    return directory / "index.csv"


def write_observation(data: np.ndarray, path, meta: dict) -> Path:
    """Observation matrix (rows t_1..t_Nt, columns masked nodes) plus a JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(data, dtype=float), delimiter=",", fmt="%.17g")
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def read_observation(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    side = path.with_suffix(".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    return data, meta


def config_hash(cfg_dict: dict) -> str:
    """SHA-256 of the canonical JSON form of a configuration."""
    blob = json.dumps(cfg_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def write_metadata(path, cfg_dict: dict, extra: Optional[dict] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"config": cfg_dict, "config_hash": config_hash(cfg_dict)}
    if extra:
        payload.update(extra)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=float))
    return path
