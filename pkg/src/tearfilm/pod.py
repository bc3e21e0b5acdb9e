"""Proper-orthogonal-decomposition model reduction.

Snapshots of the full solve over a short window [0, tau] give, per
variable, a truncated SVD basis; the semi-discrete DAE is then Galerkin
projected onto those bases.  Every reduced residual evaluation lifts the
reduced vectors to the full grid, evaluates the model there, and
projects back, so the savings are entirely in the time integration (the
reduced Newton systems are tiny and dense).

For circular peaks, the snapshot stage can be replaced by cheap 1D
radial solves mapped onto the Cartesian grid and concatenated across
peaks; this loses the interaction between close peaks, which is the
point of the comparison studies.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .axisym import RadialGrid, integrate_radial, radial_to_cartesian
from .dae import (
    IntegratorConfig,
    SolutionRecord,
    Spot2DSystem,
    _snapshot_times,
    run_dae,
)
from .model import (
    EvaporationPeak,
    FieldState,
    ModelParams,
    fl_intensity,
    mechanism_terms,
    residual_f,
    residual_packed,
)
from .ndf import PolyChain
from .spectral import PeriodicGrid, eval_at_points

__all__ = [
    "SnapshotSet",
    "PodBasis",
    "capture_snapshots",
    "snapshots_from_record",
    "compute_basis",
    "build_basis",
    "radial_snapshot_basis",
    "integrate_reduced",
    "compare_records",
    "RANK_DEFAULTS",
]

# Working configurations per snapshot window length: (ranks, count)
RANK_DEFAULTS = {
    0.25: ((15, 25, 15), 40),
    0.5: ((20, 30, 20), 50),
    1.0: ((40, 50, 40), 100),
}


def default_ranks(tau: float) -> tuple[tuple[int, int, int], int]:
    """Rank and snapshot-count defaults for a given window length; the
    nearest tabulated window is used for other values."""
    key = min(RANK_DEFAULTS, key=lambda k: abs(k - tau))
    return RANK_DEFAULTS[key]


@dataclass
class SnapshotSet:
    """Per-variable snapshot matrices, columns are states at increasing
    times (the first at t = 0)."""

    times: np.ndarray
    matrices: dict[str, np.ndarray]
    grid_shape: tuple[int, int]
    provenance: dict = field(default_factory=dict)
    record: SolutionRecord | None = None  # generating run, when available

    def __post_init__(self):
        if self.times.size < 2:
            raise ValueError("need at least two snapshots")
        if not np.all(np.diff(self.times) > 0) or self.times[0] != 0.0:
            raise ValueError("snapshot times must increase strictly from 0")
        mn = self.grid_shape[0] * self.grid_shape[1]
        for name, S in self.matrices.items():
            if S.shape != (mn, self.times.size):
                raise ValueError(f"snapshot matrix {name} has shape {S.shape}")


def snapshots_from_record(
    record: SolutionRecord,
    count: int,
    include_f: bool = False,
    provenance: dict | None = None,
) -> SnapshotSet:
    """Sample a stored run at ``count`` uniform times over its span."""
    if count < 2:
        raise ValueError("need at least two snapshots")
    times = np.linspace(record.history.t_min, record.history.t_max, count)
    mn = record.history(times[0]).size // 2
    names = ["h", "p", "c"] + (["f"] if include_f else [])
    mats = {name: np.empty((mn, count)) for name in names}
    for j, t in enumerate(times):
        f_sel = record.f_history(t) if include_f else None
        state = record.system.state_from_dense(float(t), record.history(t), f_sel)
        for name in names:
            mats[name][:, j] = getattr(state, name).ravel()
    return SnapshotSet(
        times=times,
        matrices=mats,
        grid_shape=record.grid.shape,
        provenance=provenance or {},
        record=record,
    )


def capture_snapshots(
    initial: FieldState,
    J: np.ndarray,
    params: ModelParams,
    config: IntegratorConfig,
    grid: PeriodicGrid,
    tau: float,
    count: int,
    include_f: bool = False,
) -> SnapshotSet:
    """Run the full solver over [0, tau] and sample the dense output at
    ``count`` uniformly spaced times."""
    from .dae import integrate

    cfg = config.with_(t_end=tau, store_history=True, solve_f=include_f)
    record = integrate(initial, J, params, cfg, grid)
    if record.halted_reason != "t_end":
        raise RuntimeError(
            f"snapshot run ended before tau={tau}: {record.halted_reason}"
            f" ({record.failure_message or 'breakup event'})"
        )
    return snapshots_from_record(
        record, count, include_f,
        provenance={"source": "full2d", "tau": tau, "count": count},
    )


def compute_basis(S: np.ndarray, rank: int) -> tuple[np.ndarray, np.ndarray]:
    """First ``rank`` left singular vectors of the snapshot matrix and
    the full singular-value spectrum."""
    S = np.asarray(S, dtype=float)
    max_rank = min(S.shape)
    if not 1 <= rank <= max_rank:
        raise ValueError(f"rank must lie in 1..{max_rank}, got {rank}")
    U, svals, _ = np.linalg.svd(S, full_matrices=False)
    return U[:, :rank].copy(), svals


@dataclass
class PodBasis:
    """Orthonormal reduction bases per variable, plus provenance."""

    Bh: np.ndarray
    Bp: np.ndarray
    Bc: np.ndarray
    Bf: np.ndarray | None = None
    grid_shape: tuple[int, int] = (0, 0)
    provenance: dict = field(default_factory=dict)

    @property
    def ranks(self) -> tuple[int, ...]:
        base = (self.Bh.shape[1], self.Bp.shape[1], self.Bc.shape[1])
        return base if self.Bf is None else base + (self.Bf.shape[1],)

    def save(self, path) -> None:
        """Binary array container (zip of .npy entries) with a
        plain-text JSON header describing shapes and provenance."""
        header = {
            "variables": ["h", "p", "c"] + (["f"] if self.Bf is not None else []),
            "ranks": list(self.ranks),
            "grid_shape": list(self.grid_shape),
            "provenance": self.provenance,
        }
        with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
            zf.writestr("header.json", json.dumps(header, indent=2))
            for name, arr in self._arrays().items():
                buf = io.BytesIO()
                np.save(buf, arr)
                zf.writestr(f"{name}.npy", buf.getvalue())

    def _arrays(self) -> dict[str, np.ndarray]:
        out = {"B_h": self.Bh, "B_p": self.Bp, "B_c": self.Bc}
        if self.Bf is not None:
            out["B_f"] = self.Bf
        return out

    @classmethod
    def load(cls, path) -> "PodBasis":
        with zipfile.ZipFile(path, "r") as zf:
            header = json.loads(zf.read("header.json"))

            def arr(name):
                return np.load(io.BytesIO(zf.read(name)))

            Bf = arr("B_f.npy") if "f" in header["variables"] else None
            return cls(
                Bh=arr("B_h.npy"),
                Bp=arr("B_p.npy"),
                Bc=arr("B_c.npy"),
                Bf=Bf,
                grid_shape=tuple(header["grid_shape"]),
                provenance=header.get("provenance", {}),
            )


def build_basis(
    snapshots: SnapshotSet,
    ranks: tuple[int, int, int],
    rank_f: int | None = None,
) -> PodBasis:
    """Truncated SVD bases from a snapshot set.  ``rank_f`` defaults to
    the osmolarity rank when fluorescein snapshots are present."""
    Bh, _ = compute_basis(snapshots.matrices["h"], ranks[0])
    Bp, _ = compute_basis(snapshots.matrices["p"], ranks[1])
    Bc, _ = compute_basis(snapshots.matrices["c"], ranks[2])
    Bf = None
    if "f" in snapshots.matrices:
        Bf, _ = compute_basis(snapshots.matrices["f"],
                              rank_f if rank_f is not None else ranks[2])
    return PodBasis(
        Bh=Bh, Bp=Bp, Bc=Bc, Bf=Bf,
        grid_shape=snapshots.grid_shape,
        provenance=dict(snapshots.provenance, ranks=list(ranks)),
    )


def radial_snapshot_basis(
    peaks: list[EvaporationPeak],
    v_b: float,
    params: ModelParams,
    config: IntegratorConfig,
    grid: PeriodicGrid,
    tau: float = 3.0,
    count: int = 100,
    ranks: tuple[int, int, int] = (20, 30, 20),
    rank_f: int | None = None,
    rgrid: RadialGrid | None = None,
    include_f: bool = False,
) -> PodBasis:
    """Snapshot bases from 1D radial solves of the individual circular
    peaks, mapped onto the Cartesian grid and concatenated.

    Much cheaper than a 2D snapshot run, but the basis carries no
    information about peak interaction.
    """
    if not peaks:
        raise ValueError("need at least one peak")
    for pk in peaks:
        if not pk.circular:
            raise ValueError(f"radial snapshots require circular peaks, got {pk}")
    if rgrid is None:
        rgrid = RadialGrid()
    variables = ["h", "p", "c"] + (["f"] if include_f else [])
    columns: dict[str, list[np.ndarray]] = {v: [] for v in variables}
    cache: dict[tuple[float, float], SolutionRecord] = {}
    for pk in peaks:
        key = (pk.a, pk.widths[0])
        if key not in cache:
            rcfg = config.with_(t_end=tau, solve_f=include_f, lin_solver="dense")
            cache[key] = integrate_radial(key, v_b, params, rcfg, rgrid)
        rec = cache[key]
        times = np.linspace(0.0, rec.history.t_max, count)
        for t in times:
            state = rec.state_at(t)
            fields = {"h": state.h, "p": state.p, "c": state.c}
            if include_f:
                fields["f"] = state.f
            for v in variables:
                columns[v].append(
                    radial_to_cartesian(rgrid.r, fields[v], pk.center, grid).ravel()
                )
    mats = {v: np.column_stack(columns[v]) for v in variables}
    Bh, _ = compute_basis(mats["h"], ranks[0])
    Bp, _ = compute_basis(mats["p"], ranks[1])
    Bc, _ = compute_basis(mats["c"], ranks[2])
    Bf = None
    if include_f:
        Bf, _ = compute_basis(mats["f"], rank_f if rank_f is not None else ranks[2])
    return PodBasis(
        Bh=Bh, Bp=Bp, Bc=Bc, Bf=Bf,
        grid_shape=grid.shape,
        provenance={"source": "radial1d", "tau": tau, "count": count,
                    "ranks": list(ranks), "peaks": len(peaks)},
    )


class ReducedSpotSystem:
    """Galerkin projection of the 2D system onto the POD bases.

    Reduced state [h~; p~; c~]; every residual evaluation lifts to the
    grid, evaluates the full model there, and projects back.
    """

    def __init__(self, basis: PodBasis, grid: PeriodicGrid, J: np.ndarray,
                 params: ModelParams):
        if basis.grid_shape != grid.shape:
            raise ValueError("basis was built on a different grid")
        self.basis = basis
        self.grid = grid
        self.J = np.asarray(J, dtype=float)
        self.params = params
        self.kh, self.kp, self.kc = basis.ranks[:3]
        self.n = self.kh + self.kp + self.kc
        self.mass = np.concatenate(
            [np.ones(self.kh), np.zeros(self.kp), np.ones(self.kc)]
        )
        self.dense_sel = np.arange(self.n)
        self._full = Spot2DSystem(grid, J, params)

    def split(self, y: np.ndarray):
        return (
            y[: self.kh],
            y[self.kh : self.kh + self.kp],
            y[self.kh + self.kp :],
        )

    def lift(self, y: np.ndarray):
        """Reduced coordinates to full grid fields."""
        ht, pt, ct = self.split(y)
        shape = self.grid.shape
        return (
            (self.basis.Bh @ ht).reshape(shape),
            (self.basis.Bp @ pt).reshape(shape),
            (self.basis.Bc @ ct).reshape(shape),
        )

    def fun(self, t: float, y: np.ndarray) -> np.ndarray:
        h, p, c = self.lift(y)
        out = residual_packed(np.stack([h, p, c]), self.J, self.params, self.grid)
        return np.concatenate([
            self.basis.Bh.T @ out[0].ravel(),
            self.basis.Bp.T @ out[1].ravel(),
            self.basis.Bc.T @ out[2].ravel(),
        ])

    def _project_p(self, ht: np.ndarray) -> np.ndarray:
        """p~ that zeroes the projected algebraic residual for given h~:
        p~ = -Bp^T lap(Bh h~)."""
        h = (self.basis.Bh @ ht).reshape(self.grid.shape)
        lap_h = sfft.irfft2(self.grid.k2 * sfft.rfft2(h), s=self.grid.shape)
        return -self.basis.Bp.T @ lap_h.ravel()

    def consistent_initial(self, state: FieldState):
        ht = self.basis.Bh.T @ np.asarray(state.h, dtype=float).ravel()
        ct = self.basis.Bc.T @ np.asarray(state.c, dtype=float).ravel()
        pt = self._project_p(ht)
        y0 = np.concatenate([ht, pt, ct])
        out = self.fun(state.t, y0)
        hdot, _, cdot = self.split(out)
        pdot = self._project_p(hdot)
        return y0, np.concatenate([hdot, pdot, cdot])

    def breakup_indicator(self, y: np.ndarray) -> float:
        return float((self.basis.Bh @ y[: self.kh]).min())

    def indicator_dense(self, y_sel: np.ndarray) -> float:
        return self.breakup_indicator(y_sel)

    def state_from_dense(self, t: float, y_sel: np.ndarray,
                         f_sel: np.ndarray | None = None) -> FieldState:
        h, p, c = self.lift(y_sel)
        f = None
        if f_sel is not None:
            f = (self.basis.Bf @ f_sel).reshape(self.grid.shape)
        return FieldState(h=h, p=p, c=c, f=f, t=t)

    def algebraic_defect(self, y: np.ndarray) -> float:
        h, p, c = self.lift(y)
        lap_h = sfft.irfft2(self.grid.k2 * sfft.rfft2(h), s=self.grid.shape)
        r = self.basis.Bp.T @ (p + lap_h).ravel()
        return float(np.abs(r).max())


class _ReducedFStage:
    """Reduced fluorescein stage against the reduced (h, p, c) chain."""

    def __init__(self, system: ReducedSpotSystem, history: PolyChain):
        if system.basis.Bf is None:
            raise ValueError("basis has no fluorescein block")
        self.system = system
        self.history = history
        self.n = system.basis.Bf.shape[1]
        self.mass = np.ones(self.n)
        self.dense_sel = np.arange(self.n)

    def fun(self, t, ft):
        sys_ = self.system
        h, p, c = sys_.lift(self.history(t))
        f = (sys_.basis.Bf @ ft).reshape(sys_.grid.shape)
        r_f = residual_f(h, p, f, c, sys_.J, sys_.params, sys_.grid)
        return sys_.basis.Bf.T @ r_f.ravel()

    def breakup_indicator(self, y):
        return np.inf


def integrate_reduced(
    basis: PodBasis,
    initial: FieldState,
    J: np.ndarray,
    params: ModelParams,
    config: IntegratorConfig,
    grid: PeriodicGrid,
    probes=((0.0, 0.0),),
) -> SolutionRecord:
    """Integrate the reduced DAE from ``initial`` (by default the run
    restarts from t = 0 in reduced coordinates) until the lifted
    thickness reaches the breakup threshold."""
    system = ReducedSpotSystem(basis, grid, J, params)
    y0, ydot0 = system.consistent_initial(initial)
    config = config.with_(lin_solver="dense", store_history=True)
    history, status = run_dae(system, y0, ydot0, config, t0=initial.t)

    f_history = None
    if config.solve_f and basis.Bf is not None \
            and status["halted_reason"] != "failure" and len(history) >= 2:
        fstage = _ReducedFStage(system, history)
        f0_field = initial.f if initial.f is not None \
            else params.f0 * np.ones(grid.shape)
        ft0 = basis.Bf.T @ np.asarray(f0_field, dtype=float).ravel()
        fcfg = config.with_(t_end=history.t_max, detect_breakup=False)
        f_history, fstatus = run_dae(fstage, ft0, fstage.fun(initial.t, ft0),
                                     fcfg, t0=initial.t)
        if fstatus["halted_reason"] == "failure":
            raise RuntimeError(
                f"reduced f stage failed: {fstatus['failure_message']}"
            )

    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    times = history.t
    names = ["h", "p", "c", "f", "I",
             "advection", "diffusion", "evaporation", "osmosis"]
    traces = {k: np.full((times.size, len(probes)), np.nan) for k in names}
    for i, t in enumerate(times):
        h, p, c = system.lift(history(t))
        fields = {"h": h, "p": p, "c": c}
        if f_history is not None:
            f = (basis.Bf @ f_history(t)).reshape(grid.shape)
            fields["f"] = f
            fields["I"] = fl_intensity(h, f, params)
        fields.update(mechanism_terms(h, p, c, J, params, grid))
        for k, arr in fields.items():
            traces[k][i] = eval_at_points(arr, grid, probes)

    t_final = status["final"][0]
    snapshots = []
    for ts in _snapshot_times(config, t_final):
        f_sel = f_history(ts) if f_history is not None else None
        snapshots.append(system.state_from_dense(float(ts), history(ts), f_sel))

    return SolutionRecord(
        times=times,
        tbut=status["tbut"],
        halted_reason=status["halted_reason"],
        failure_message=status["failure_message"],
        probe_points=probes,
        traces=traces,
        snapshots=snapshots,
        history=history,
        f_history=f_history,
        wall_time=status["wall_time"],
        step_walls=status["step_walls"],
        constraint_defects=status["constraint_defects"],
        nsteps=status["nsteps"],
        nfev=status["nfev"],
        grid=grid,
        system=system,
    )


def compare_records(
    rec_test: SolutionRecord,
    rec_ref: SolutionRecord,
    times: np.ndarray,
    variables: tuple[str, ...] = ("h", "p", "c", "I"),
) -> dict[str, np.ndarray]:
    """Relative 2-norm error of ``rec_test`` against ``rec_ref`` at the
    given times, per variable.  Intensity is derived from h and f."""
    from .dae import relative_error

    out = {v: np.empty(len(times)) for v in variables}
    for i, t in enumerate(times):
        a = rec_test.state_at(t)
        b = rec_ref.state_at(t)
        for v in variables:
            if v == "I":
                fa = fl_intensity(a.h, a.f, rec_test.system.params)
                fb = fl_intensity(b.h, b.f, rec_ref.system.params)
            else:
                fa, fb = getattr(a, v), getattr(b, v)
            if np.linalg.norm(fb) == 0.0:
                # the initial pressure field is identically zero
                out[v][i] = np.nan
            else:
                out[v][i] = relative_error(fa, fb)
    return out
