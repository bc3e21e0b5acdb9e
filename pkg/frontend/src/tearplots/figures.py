"""Figure renderers.

Each figure id maps to a renderer that reads CLI data products and
draws a deterministic matplotlib figure (fixed backend, styles, and
dpi; repeated invocations on the same inputs produce identical bytes).
The science content is read verbatim from the files; this module only
slices, converts units, and draws.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import (
    grid_axes,
    read_csv_columns,
    read_snapshot,
    read_traces,
    snapshot_index,
)

plt.rcParams.update({
    "figure.dpi": 150,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
})

FIELD_LABELS = {
    "h": "thickness h",
    "p": "pressure p",
    "c": "osmolarity c",
    "f": "fluorescein f",
    "I": "intensity I",
}


def _run_dirs(data_dir: Path) -> list[Path]:
    """Immediate subdirectories that look like run outputs, else the
    directory itself."""
    data_dir = Path(data_dir)
    subs = sorted(d for d in data_dir.iterdir()
                  if d.is_dir() and (d / "manifest.json").exists())
    if subs:
        return subs
    if (data_dir / "manifest.json").exists():
        return [data_dir]
    raise ValueError(f"no run outputs under {data_dir}")


def _save(fig, out_path):
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format=out_path.suffix.lstrip(".") or "png",
                metadata={"Software": "tearplots"})
    plt.close(fig)
    return out_path


def render_fig3(data_dir, out_path):
    """Radial profiles of h, p, c, f, I at several times, sliced from
    the snapshots of one centered-spot run along the +x axis."""
    run = _run_dirs(data_dir)[0]
    stems = snapshot_index(run)
    if not stems:
        raise ValueError(f"no snapshots in {run}")
    variables = ["h", "p", "c", "f", "I"]
    fig, axes = plt.subplots(1, 5, figsize=(13, 2.6), constrained_layout=True)
    for stem in stems:
        for ax, var in zip(axes, variables):
            field, meta = read_snapshot(run, stem, var)
            if field.ndim != 2:
                raise ValueError("fig3 expects 2D snapshots")
            x = grid_axes(field.shape)[0]
            i0, j0 = field.shape[0] // 2, field.shape[1] // 2
            r = x[i0:]
            ax.plot(r, field[i0:, j0], label=f"t={meta['time']:.2f}")
    for ax, var in zip(axes, variables):
        ax.set_xlabel("r")
        ax.set_title(FIELD_LABELS[var])
    axes[0].legend(fontsize=6)
    return _save(fig, out_path)


def render_fig5(data_dir, out_path):
    """Central values of h, c, I and the dominant osmolarity mechanism
    terms against time, overlaid for each run under the data directory."""
    runs = _run_dirs(data_dir)
    top = ["h", "c", "I"]
    bottom = ["diffusion", "evaporation", "osmosis"]
    fig, axes = plt.subplots(2, 3, figsize=(9, 5), constrained_layout=True)
    for run in runs:
        traces = read_traces(run)
        for ax, var in zip(axes[0], top):
            ax.plot(traces["t"], traces[var], label=run.name)
        for ax, var in zip(axes[1], bottom):
            ax.plot(traces["t"], traces[var], label=run.name)
    for ax, var in zip(axes[0], top):
        ax.set_title(FIELD_LABELS[var])
    for ax, var in zip(axes[1], bottom):
        ax.set_title(var)
        ax.set_xlabel("t")
    axes[0][0].legend(fontsize=6)
    return _save(fig, out_path)


def render_fig8(data_dir, out_path):
    """Fluorescence-intensity maps at three time levels for each run
    (columns: runs, rows: times)."""
    runs = _run_dirs(data_dir)
    fig, axes = plt.subplots(3, len(runs), figsize=(2.6 * len(runs), 7.5),
                             constrained_layout=True, squeeze=False)
    for col, run in enumerate(runs):
        stems = snapshot_index(run)
        if len(stems) < 3:
            raise ValueError(f"need at least 3 snapshots in {run}")
        picks = [stems[len(stems) // 3], stems[2 * len(stems) // 3], stems[-1]]
        for row, stem in enumerate(picks):
            field, meta = read_snapshot(run, stem, "I")
            x, y = grid_axes(field.shape)
            ax = axes[row][col]
            ax.pcolormesh(x, y, field.T, vmin=0.0, vmax=0.2, shading="auto")
            ax.set_aspect("equal")
            ax.grid(False)
            ax.set_title(f"{run.name}  t={meta['time']:.2f}", fontsize=7)
    return _save(fig, out_path)


def render_fig12(data_dir, out_path):
    """POD relative-error curves, radial-snapshot basis against the
    2D-snapshot basis, from a pod-compare run."""
    data_dir = Path(data_dir)
    files = sorted(data_dir.glob("pod_err_*.csv"))
    if not files:
        raise ValueError(f"no pod_err_*.csv files under {data_dir}")
    variables = ["h", "p", "c", "I"]
    fig, axes = plt.subplots(1, 4, figsize=(11, 2.6), constrained_layout=True)
    for path in files:
        cols = read_csv_columns(path, ["t", "err_h"])
        label = path.stem.replace("pod_err_", "")
        for ax, var in zip(axes, variables):
            key = f"err_{var}"
            if key in cols:
                ax.semilogy(cols["t"], cols[key], label=label)
    for ax, var in zip(axes, variables):
        ax.set_title(f"relative error, {var}")
        ax.set_xlabel("t")
    axes[0].legend(fontsize=6)
    return _save(fig, out_path)


def render_fig14(data_dir, out_path):
    """Peak and central osmolarity at breakup, and breakup time,
    against the two-spot half-separation (from a sweep summary)."""
    path = Path(data_dir) / "sweep_summary.csv"
    if not path.exists():
        raise ValueError(f"missing {path}")
    cols = read_csv_columns(path, ["value", "tbut", "c_max", "c_center"])
    order = np.argsort(cols["value"])
    xk = cols["value"][order]
    fig, axes = plt.subplots(1, 2, figsize=(7.5, 2.8), constrained_layout=True)
    axes[0].plot(xk, cols["c_max"][order], "o-", label="max osmolarity")
    axes[0].plot(xk, cols["c_center"][order], "s--", label="osmolarity at origin")
    axes[0].set_xlabel("half-separation $x_k$")
    axes[0].set_title("osmolarity at breakup")
    axes[0].legend(fontsize=7)
    axes[1].plot(xk, cols["tbut"][order], "o-")
    axes[1].set_xlabel("half-separation $x_k$")
    axes[1].set_title("breakup time")
    return _save(fig, out_path)


FIGURES = {
    "fig3": (render_fig3, "single-spot profiles vs r at several times"),
    "fig5": (render_fig5, "central values and mechanism terms vs time"),
    "fig8": (render_fig8, "intensity maps at three time levels per run"),
    "fig12": (render_fig12, "POD error curves, radial vs 2D basis"),
    "fig14": (render_fig14, "osmolarity and breakup time vs separation"),
}


def render(figure_id: str, data_dir, out_path) -> Path:
    if figure_id not in FIGURES:
        raise ValueError(
            f"unknown figure {figure_id!r}; available: {sorted(FIGURES)}"
        )
    func, _ = FIGURES[figure_id]
    return func(data_dir, out_path)
