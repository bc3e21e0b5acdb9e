"""Readers for the simulation data products.

The solver CLI writes probe traces as CSV, field snapshots as flat
little-endian float64 arrays with JSON sidecars, a JSON manifest per
run, and study summaries as CSV.  Everything here is I/O and axis
bookkeeping; no science numbers are computed in this package.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

TRACE_COLUMNS = ["t", "h", "p", "c", "f", "I",
                 "advection", "diffusion", "evaporation", "osmosis"]


def read_csv_columns(path, required: list[str]) -> dict[str, np.ndarray]:
    """Read a CSV with a header row; required columns must parse as
    floats, other columns fall back to strings (labels, statuses)."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        for col in required:
            if col not in names:
                raise ValueError(f"missing column {col!r} in {path}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"no data rows in {path}")
    out = {}
    for name in names:
        raw = [r[name] for r in rows]
        try:
            out[name] = np.array(
                [float(v) if v not in ("", None) else np.nan for v in raw]
            )
        except ValueError:
            if name in required:
                raise ValueError(
                    f"column {name!r} in {path} is not numeric"
                ) from None
            out[name] = np.array(raw, dtype=object)
    return out


def read_traces(run_dir, probe: int = 0) -> dict[str, np.ndarray]:
    return read_csv_columns(Path(run_dir) / f"probe_{probe:02d}.csv",
                            TRACE_COLUMNS)


def read_manifest(run_dir) -> dict:
    return json.loads((Path(run_dir) / "manifest.json").read_text())


def snapshot_index(run_dir) -> list[str]:
    """Sorted snapshot stems (snap_000, snap_001, ...) present in a run."""
    snap_dir = Path(run_dir) / "snapshots"
    stems = {p.name.rsplit("_", 1)[0] for p in snap_dir.glob("snap_*.bin")}
    return sorted(stems)


def read_snapshot(run_dir, stem: str, variable: str):
    """One field array plus its sidecar metadata."""
    snap_dir = Path(run_dir) / "snapshots"
    bin_path = snap_dir / f"{stem}_{variable}.bin"
    if not bin_path.exists():
        raise ValueError(f"missing snapshot variable {variable!r} ({bin_path})")
    sidecar = json.loads(bin_path.with_suffix(".json").read_text())
    data = np.fromfile(bin_path, dtype="<f8").reshape(sidecar["shape"])
    return data, sidecar


def grid_axes(shape) -> tuple[np.ndarray, ...]:
    """Node coordinates of the periodic solver grid, x_i = -pi + 2*pi*i/n
    per axis (the solver's documented convention)."""
    return tuple(-np.pi + 2.0 * np.pi * np.arange(n) / n for n in shape)


def time_scale_seconds(manifest: dict) -> float:
    """Seconds per nondimensional time unit from the run's parameters."""
    p = manifest["config"]["params"]
    return p["d_um"] / p["v_max_um_min"] * 60.0


def length_scale_mm(manifest: dict) -> float:
    return manifest["config"]["params"]["ell_mm"]
