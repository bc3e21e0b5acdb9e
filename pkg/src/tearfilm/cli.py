"""Configuration-driven command line.

Verbs: ``run`` (one simulation in any mode), ``sweep`` (a family of
runs with a summary table), ``pod-compare`` (full vs reduced error and
timing study), ``validate-config``.  All data products land in the
output directory: probe CSVs, binary snapshots with JSON sidecars, and
a checksummed manifest written atomically at the end.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import pydantic

from .axisym import RadialGrid, integrate_radial
from .config import RunConfig, SweepConfig, load_run_config, load_sweep_config
from .dae import integrate, relative_error
from .model import eval_J, fl_intensity, uniform_state
from .outputs import write_csv, write_manifest, write_snapshots, write_traces
from .pod import (
    build_basis,
    capture_snapshots,
    compare_records,
    default_ranks,
    integrate_reduced,
    radial_snapshot_basis,
)
from .spectral import PeriodicLine, fourier_interpolate
from .streak import integrate_streak

log = logging.getLogger("tearfilm")


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _tail_wall(record, t_from: float) -> float:
    """Wall-clock spent on accepted steps at times >= t_from."""
    n = min(record.step_walls.size, record.times.size)
    walls, times = record.step_walls[:n], record.times[:n]
    idx = int(np.searchsorted(times, t_from, side="left"))
    idx = min(idx, n - 1)
    return float(walls[-1] - walls[idx])


def _integ_config(cfg: RunConfig, **overrides):
    out = cfg.outputs
    base = dict(
        snapshot_times=tuple(out.snapshot_times) if out.snapshot_times else None,
        snapshot_cadence=out.snapshot_cadence,
    )
    base.update(overrides)
    return cfg.integrator.to_config(**base)


def _single_peak(cfg: RunConfig):
    peaks = cfg.peaks()
    if len(peaks) != 1:
        raise ValueError(f"mode {cfg.mode!r} needs exactly one peak")
    return peaks[0]


def run_full(cfg: RunConfig, out_dir: Path):
    params = cfg.params.to_model()
    grid = cfg.grid.to_grid()
    J = eval_J(cfg.peaks(), cfg.evaporation.v_b, grid,
               cfg.evaporation.periodic_images)
    record = integrate(uniform_state(grid, params), J, params,
                       _integ_config(cfg), grid, probes=cfg.probe_points())
    files = write_traces(record, out_dir) + write_snapshots(record, out_dir)
    return record, files, {"mode": "full"}


def run_pod(cfg: RunConfig, out_dir: Path):
    params = cfg.params.to_model()
    grid = cfg.grid.to_grid()
    peaks = cfg.peaks()
    J = eval_J(peaks, cfg.evaporation.v_b, grid, cfg.evaporation.periodic_images)
    pod_cfg = cfg.pod
    table_ranks, table_count = default_ranks(pod_cfg.tau)
    ranks = pod_cfg.ranks or table_ranks
    count = pod_cfg.snapshot_count or table_count
    icfg = _integ_config(cfg)
    state0 = uniform_state(grid, params)

    if pod_cfg.basis == "radial":
        basis = radial_snapshot_basis(
            peaks, cfg.evaporation.v_b, params, icfg, grid,
            tau=cfg.radial.tau, count=cfg.radial.snapshot_count,
            ranks=ranks, rank_f=pod_cfg.rank_f,
            rgrid=RadialGrid(cfg.radial.R0, cfg.radial.n),
            include_f=pod_cfg.include_f,
        )
        snaps = None
    else:
        snaps = capture_snapshots(state0, J, params, icfg, grid,
                                  tau=pod_cfg.tau, count=count,
                                  include_f=pod_cfg.include_f)
        basis = build_basis(snaps, ranks, rank_f=pod_cfg.rank_f)
    if pod_cfg.basis_file:
        basis.save(out_dir / pod_cfg.basis_file)

    if pod_cfg.restart:
        initial = state0
    elif snaps is None:
        raise ValueError("pod continuation (restart: false) requires a "
                         "full2d basis; the radial shortcut has no 2D state "
                         "at tau")
    else:
        initial = snaps.record.state_at(pod_cfg.tau)
    record = integrate_reduced(basis, initial, J, params, icfg, grid,
                               probes=cfg.probe_points())
    files = write_traces(record, out_dir) + write_snapshots(record, out_dir)
    if pod_cfg.basis_file:
        files.append(out_dir / pod_cfg.basis_file)
    extra = {"mode": "pod", "basis_source": pod_cfg.basis,
             "ranks": list(basis.ranks), "tau": pod_cfg.tau}
    return record, files, extra


def run_radial1d(cfg: RunConfig, out_dir: Path):
    params = cfg.params.to_model()
    peak = _single_peak(cfg)
    if not peak.circular:
        raise ValueError("radial1d mode needs a circular peak")
    rgrid = RadialGrid(cfg.radial.R0, cfg.radial.n)
    probes = sorted({0.0} | {abs(p[0]) for p in cfg.probe_points()})
    record = integrate_radial((peak.a, peak.widths[0]), cfg.evaporation.v_b,
                              params, _integ_config(cfg), rgrid, probes=probes)
    files = write_traces(record, out_dir) + write_snapshots(record, out_dir)
    return record, files, {"mode": "radial1d"}


def run_streak1d(cfg: RunConfig, out_dir: Path):
    params = cfg.params.to_model()
    peak = _single_peak(cfg)
    line = PeriodicLine(cfg.streak.n)
    probes = sorted({p[0] for p in cfg.probe_points()})
    record = integrate_streak((peak.a, peak.widths[0]), cfg.evaporation.v_b,
                              params, _integ_config(cfg), line, probes=probes)
    files = write_traces(record, out_dir) + write_snapshots(record, out_dir)
    return record, files, {"mode": "streak1d"}


def run_grid_study(cfg: RunConfig, out_dir: Path):
    """Relative error of h, p, c at a fixed time versus the reference
    grid, for a list of resolutions.  Breakup detection is off so every
    run reaches the common comparison time."""
    params = cfg.params.to_model()
    study = cfg.grid_study
    peaks = cfg.peaks()

    def solve(nsize):
        from .spectral import PeriodicGrid

        grid = PeriodicGrid(nsize, nsize)
        J = eval_J(peaks, cfg.evaporation.v_b, grid,
                   cfg.evaporation.periodic_images)
        icfg = _integ_config(cfg, t_end=study.t_eval, detect_breakup=False,
                             store_history=False, solve_f=False)
        record = integrate(uniform_state(grid, params), J, params, icfg, grid)
        if record.halted_reason != "t_end":
            raise RuntimeError(f"grid-study run at N={nsize} failed: "
                               f"{record.failure_message}")
        return grid, record.final_state, record.wall_time

    ref_grid, ref_state, ref_wall = solve(study.reference)
    rows = []
    for nsize in study.sizes:
        grid, state, wall = solve(nsize)
        errs = [
            relative_error(fourier_interpolate(getattr(state, v), grid, ref_grid),
                           getattr(ref_state, v))
            for v in ("h", "p", "c")
        ]
        rows.append([nsize, *errs, wall])
        log.info("grid N=%d: err_h=%.3e err_p=%.3e err_c=%.3e (%.1fs)",
                 nsize, *errs, wall)
    path = out_dir / "grid_errors.csv"
    write_csv(path, ["N", "err_h", "err_p", "err_c", "wall_s"], rows)
    extra = {
        "mode": "grid_study",
        "reference": study.reference,
        "reference_wall_s": ref_wall,
        "t_eval": study.t_eval,
    }
    return None, [path], extra


def run_pod_error_study(cfg: RunConfig, out_dir: Path):
    """Full solve plus one reduced solve per (source, tau) combination;
    per-variable relative-error time series and a timing report."""
    params = cfg.params.to_model()
    grid = cfg.grid.to_grid()
    peaks = cfg.peaks()
    J = eval_J(peaks, cfg.evaporation.v_b, grid, cfg.evaporation.periodic_images)
    icfg = _integ_config(cfg)
    state0 = uniform_state(grid, params)

    log.info("pod study: full reference solve")
    full = integrate(state0, J, params, icfg, grid, probes=cfg.probe_points())
    if full.halted_reason == "failure":
        raise RuntimeError(f"reference solve failed: {full.failure_message}")
    files = []
    timing = {
        "full_wall_s": full.wall_time,
        "grid": list(grid.shape),
        "combos": [],
    }
    for source in cfg.pod_study.sources:
        for tau in cfg.pod_study.taus:
            table_ranks, table_count = default_ranks(tau)
            ranks = cfg.pod.ranks or table_ranks
            count = cfg.pod.snapshot_count or table_count
            log.info("pod study: source=%s tau=%g ranks=%s", source, tau, ranks)
            if source == "radial":
                basis = radial_snapshot_basis(
                    peaks, cfg.evaporation.v_b, params, icfg, grid,
                    tau=cfg.radial.tau, count=cfg.radial.snapshot_count,
                    ranks=ranks, rank_f=cfg.pod.rank_f,
                    rgrid=RadialGrid(cfg.radial.R0, cfg.radial.n),
                    include_f=cfg.pod.include_f,
                )
                capture_wall = None
            else:
                snaps = capture_snapshots(state0, J, params, icfg, grid,
                                          tau=tau, count=count,
                                          include_f=cfg.pod.include_f)
                basis = build_basis(snaps, ranks, rank_f=cfg.pod.rank_f)
                capture_wall = snaps.record.wall_time
            red = integrate_reduced(basis, state0, J, params, icfg, grid,
                                    probes=cfg.probe_points())
            t_hi = min(full.times[-1], red.times[-1])
            times = np.linspace(t_hi / cfg.pod_study.error_times, t_hi,
                                cfg.pod_study.error_times)
            variables = ("h", "p", "c", "I") if cfg.pod.include_f else ("h", "p", "c")
            errs = compare_records(red, full, times, variables=variables)
            name = f"pod_err_{source}_tau{tau:g}.csv"
            header = ["t"] + [f"err_{v}" for v in variables]
            rows = [[t, *(errs[v][i] for v in variables)]
                    for i, t in enumerate(times)]
            path = out_dir / name
            write_csv(path, header, rows)
            files.append(path)
            timing["combos"].append({
                "source": source,
                "tau": tau,
                "ranks": list(basis.ranks),
                "capture_wall_s": capture_wall,
                "reduced_wall_s": red.wall_time,
                "reduced_tbut": red.tbut,
                "full_tbut": full.tbut,
                "full_tail_wall_s": _tail_wall(full, tau),
                "reduced_tail_wall_s": _tail_wall(red, tau),
                "error_csv": name,
            })
    tpath = out_dir / "timing.json"
    tpath.write_text(json.dumps(timing, indent=2) + "\n")
    files.append(tpath)
    return full, files, {"mode": "pod_error_study", "timing": timing}


_RUNNERS = {
    "full": run_full,
    "pod": run_pod,
    "radial1d": run_radial1d,
    "streak1d": run_streak1d,
    "grid_study": run_grid_study,
    "pod_error_study": run_pod_error_study,
}


def run_config(cfg: RunConfig, out_dir: Path) -> dict:
    """Execute one validated config and write all products + manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = _now()
    params = cfg.params.to_model()
    record, files, extra = _RUNNERS[cfg.mode](cfg, out_dir)
    manifest_path = write_manifest(
        out_dir, cfg.model_dump(mode="json"), params, record, files,
        started, _now(), extra=extra,
    )
    log.info("wrote %s", manifest_path)
    return json.loads(manifest_path.read_text())


def _sweep_worker(args):
    label, cfg_data, out_str = args
    cfg = RunConfig.model_validate(cfg_data)
    case_dir = Path(out_str) / f"case_{label}"
    try:
        manifest = run_config(cfg, case_dir)
        record_info = _case_metrics(case_dir, cfg)
        return {"label": label, "status": "ok", "tbut": manifest.get("tbut"),
                "tbut_seconds": manifest.get("tbut_seconds"), **record_info}
    except Exception as exc:  # sweep continues past failed cases
        log.error("case %s failed: %s", label, exc)
        return {"label": label, "status": f"failed: {exc}", "tbut": None,
                "tbut_seconds": None, "c_max": None, "c_center": None,
                "f_max": None, "I_min": None}


def _case_metrics(case_dir: Path, cfg: RunConfig) -> dict:
    """Final-time summary values from the case's written snapshots."""
    from .outputs import read_snapshot

    snap_dir = case_dir / "snapshots"
    stems = sorted({p.name.rsplit("_", 1)[0] for p in snap_dir.glob("snap_*_h.bin")})
    last = stems[-1]
    h, _ = read_snapshot(snap_dir / f"{last}_h.bin")
    c, _ = read_snapshot(snap_dir / f"{last}_c.bin")
    out = {"c_max": float(c.max())}
    params = cfg.params.to_model()
    fpath = snap_dir / f"{last}_f.bin"
    if fpath.exists():
        f, _ = read_snapshot(fpath)
        out["f_max"] = float(f.max())
        out["I_min"] = float(fl_intensity(h, f, params).min())
    else:
        out["f_max"] = None
        out["I_min"] = None
    # osmolarity at the origin: centers of even grids include it
    grid = cfg.grid.to_grid()
    out["c_center"] = float(c[grid.nx // 2, grid.ny // 2])
    return out


def run_sweep(sweep_cfg: SweepConfig, out_dir: Path, threads: int = 1) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cases = sweep_cfg.cases()
    jobs = [(label, cfg.model_dump(mode="json"), str(out_dir))
            for label, cfg in cases]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(job) for job in jobs]
    header = ["value", "label", "status", "tbut", "tbut_seconds",
              "c_max", "c_center", "f_max", "I_min"]
    rows = []
    for value, result in zip(sweep_cfg.sweep.values, results):
        rows.append([value] + [result.get(k) for k in header[1:]])
    path = out_dir / "sweep_summary.csv"
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\r\n")
        for row in rows:
            fh.write(",".join("" if v is None else str(v) for v in row) + "\r\n")
    log.info("wrote %s", path)
    return path


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tearfilm",
        description="Evaporation-driven tear-film thinning and breakup "
                    "simulations (2D spectral + POD reduction)",
    )
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML config file")
        p.add_argument("--out-dir", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker pool size (sweep only)")
        p.add_argument("--seed", type=int, default=None,
                       help="reserved for stochastic extensions")
        p.add_argument("--log-level", default="INFO",
                       choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    common(sub.add_parser("run", help="execute one simulation config"))
    common(sub.add_parser("sweep", help="run a parameter sweep"))
    common(sub.add_parser("pod-compare",
                          help="full vs reduced error/timing study"))
    pv = sub.add_parser("validate-config", help="check a config file")
    pv.add_argument("--config", required=True)
    pv.add_argument("--log-level", default="INFO",
                    choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "validate-config":
            import yaml

            with open(args.config) as fh:
                raw = yaml.safe_load(fh) or {}
            if "sweep" in raw:
                cfg = SweepConfig.model_validate(raw)
                print(f"OK: sweep config with {len(cfg.cases())} cases")
            else:
                cfg = RunConfig.model_validate(raw)
                print(f"OK: run config, mode={cfg.mode}")
            return 0
        if args.verb == "sweep":
            sweep_cfg = load_sweep_config(args.config)
            run_sweep(sweep_cfg, Path(args.out_dir), threads=args.threads)
            return 0
        cfg = load_run_config(args.config)
        if args.verb == "pod-compare" and cfg.mode != "pod_error_study":
            print("pod-compare requires mode: pod_error_study", file=sys.stderr)
            return 2
        run_config(cfg, Path(args.out_dir))
        return 0
    except pydantic.ValidationError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
