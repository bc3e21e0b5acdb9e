"""Data products written by the CLI: probe-trace CSVs, raw binary field
snapshots with JSON sidecars, and the run manifest.

All numbers are nondimensional; the manifest additionally reports the
dimensional breakup time.  Files round-trip bit exactly (float64
little-endian binaries, full-precision CSV).
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .dae import SolutionRecord
from .model import ModelParams, dimensionalize, fl_intensity

__all__ = [
    "write_traces",
    "write_snapshots",
    "write_manifest",
    "write_csv",
    "read_snapshot",
]

TRACE_COLUMNS = ["t", "h", "p", "c", "f", "I",
                 "advection", "diffusion", "evaporation", "osmosis"]


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\r\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\r\n")


def write_traces(record: SolutionRecord, out_dir: Path) -> list[Path]:
    """One CSV per probe point with the field and mechanism columns."""
    paths = []
    nprobes = record.probe_points.shape[0]
    for k in range(nprobes):
        rows = []
        for i, t in enumerate(record.times):
            row = [t]
            for name in TRACE_COLUMNS[1:]:
                row.append(record.traces[name][i, k])
            rows.append(row)
        path = out_dir / f"probe_{k:02d}.csv"
        write_csv(path, TRACE_COLUMNS, rows)
        paths.append(path)
    return paths


def write_snapshots(record: SolutionRecord, out_dir: Path) -> list[Path]:
    """Flat little-endian float64 arrays, one file per variable per
    snapshot time (h, p, c, plus f and the fluorescence intensity when
    the dye stage ran), each with a JSON sidecar."""
    snap_dir = out_dir / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    params = getattr(getattr(record, "system", None), "params", None)
    paths = []
    for idx, state in enumerate(record.snapshots):
        fields = {"h": state.h, "p": state.p, "c": state.c}
        if state.f is not None:
            fields["f"] = state.f
            if params is not None:
                fields["I"] = fl_intensity(state.h, state.f, params)
        for name, arr in fields.items():
            arr = np.ascontiguousarray(arr, dtype="<f8")
            stem = f"snap_{idx:03d}_{name}"
            bin_path = snap_dir / f"{stem}.bin"
            with open(bin_path, "wb") as fh:
                fh.write(arr.tobytes())
            sidecar = {
                "variable": name,
                "time": float(state.t),
                "shape": list(arr.shape),
                "dtype": "float64",
                "byte_order": "little",
                "order": "C",
            }
            json_path = snap_dir / f"{stem}.json"
            json_path.write_text(json.dumps(sidecar, indent=2) + "\n")
            paths.extend([bin_path, json_path])
    return paths


def read_snapshot(bin_path: Path) -> tuple[np.ndarray, dict]:
    """Load a snapshot array from its binary file and sidecar."""
    sidecar = json.loads(Path(bin_path).with_suffix(".json").read_text())
    data = np.fromfile(bin_path, dtype="<f8").reshape(sidecar["shape"])
    return data, sidecar


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    out_dir: Path,
    config_echo: dict,
    params: ModelParams,
    record: SolutionRecord | None,
    files: list[Path],
    started: str,
    finished: str,
    extra: dict | None = None,
) -> Path:
    """Atomically written JSON manifest with the config echo, version,
    timing, event outcome and a checksummed file inventory."""
    from . import __version__
    from .kernels import BACKEND

    manifest = {
        "code_version": __version__,
        "kernel_backend": BACKEND,
        "started": started,
        "finished": finished,
        "config": config_echo,
    }
    if record is not None:
        tbut_s = None
        if record.tbut is not None:
            tbut_s = dimensionalize(record.tbut, "time", params)[0]
        manifest.update(
            tbut=record.tbut,
            tbut_seconds=tbut_s,
            halted_reason=record.halted_reason,
            failure_message=record.failure_message,
            nsteps=record.nsteps,
            nfev=record.nfev,
            wall_s=record.wall_time,
        )
    if extra:
        manifest.update(extra)
    manifest["files"] = {
        str(p.relative_to(out_dir)): _sha256(p) for p in sorted(files)
    }
    path = out_dir / "manifest.json"
    fd, tmp = tempfile.mkstemp(dir=out_dir, suffix=".manifest.tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
