"""Time integration of the discretized tear-film system.

The spatial discretization of the coupled (h, p, c) equations is a
semi-explicit index-1 DAE: h and c are differential, the pressure is
algebraic through p = -lap(h).  Fluorescein is integrated in a second
stage that replays the stored (h, c) history, so the film dynamics are
bitwise independent of the dye.

Dense output is the integrator's own difference polynomial per accepted
step (never Hermite slopes from rhs evaluations, which would amplify
state noise by the stiff eigenvalues).  The pressure at interpolated
times is recomputed from the interpolated thickness, which keeps it
consistent with the algebraic constraint.

Integration halts at the first time min(h) reaches the breakup
threshold (1 um / 4.5 um by default); the crossing is located by root
finding on the dense output of the last step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft
from scipy.optimize import brentq

from . import kernels
from .model import (
    FieldState,
    ModelParams,
    fl_intensity,
    mechanism_terms,
    residual_f,
    residual_packed,
)
from .ndf import DenseNewton, KrylovNewton, NdfSolver, PolyChain
from .spectral import PeriodicGrid, eval_at_points
from .spectral import dealias_mask as spectral_dealias_mask

__all__ = [
    "IntegratorConfig",
    "SolutionRecord",
    "Spot2DSystem",
    "integrate",
    "solve_f_stage",
    "relative_error",
]

# State size above which the matrix-free Newton-Krylov path is used.
_KRYLOV_CUTOFF = 2500


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances, event threshold and bookkeeping options shared by the
    2D, radial and streak solvers."""

    rtol: float = 1e-6
    atol: float = 1e-8
    max_order: int = 5
    initial_dt: float = 1e-6
    tbu_threshold: float = 1.0 / 4.5
    t_end: float = 10.0
    snapshot_times: tuple[float, ...] | None = None
    snapshot_cadence: float | None = None
    detect_breakup: bool = True
    store_history: bool = True
    solve_f: bool = True
    lin_solver: str = "auto"  # auto | dense | krylov
    lin_rtol: float = 1e-5
    gmres_restart: int = 150
    max_step: float = np.inf
    dealias: bool = False
    use_bdf: bool = False

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("rtol and atol must be positive")
        if not 0 < self.tbu_threshold < 1:
            raise ValueError("tbu_threshold must lie in (0, 1)")
        if not 1 <= self.max_order <= 5:
            raise ValueError("max_order must lie in 1..5")
        if self.lin_solver not in ("auto", "dense", "krylov"):
            raise ValueError(f"unknown lin_solver {self.lin_solver!r}")

    def with_(self, **kw) -> "IntegratorConfig":
        return replace(self, **kw)


@dataclass
class SolutionRecord:
    """Output of one integration: accepted-step times, dense history of
    the differential fields, probe traces, snapshots and the breakup
    event if one occurred."""

    times: np.ndarray
    tbut: float | None
    halted_reason: str  # 'event' | 't_end' | 'failure'
    failure_message: str | None
    probe_points: np.ndarray
    traces: dict[str, np.ndarray]  # each (ntimes, nprobes)
    snapshots: list[FieldState]
    history: PolyChain | None  # dense (h, c) chain
    f_history: PolyChain | None
    wall_time: float
    step_walls: np.ndarray  # cumulative wall clock at each accepted step
    constraint_defects: np.ndarray  # max |p + lap h| at accepted steps
    nsteps: int
    nfev: int
    grid: object = None
    system: object = None

    @property
    def final_state(self) -> FieldState | None:
        return self.snapshots[-1] if self.snapshots else None

    def state_at(self, t: float) -> FieldState:
        """Reconstruct the fields at any time covered by the history."""
        return self.system.state_from_dense(
            float(t), self.history(t),
            self.f_history(t) if self.f_history is not None else None,
        )


def relative_error(sol_a: np.ndarray, sol_b: np.ndarray) -> float:
    """Global discrete 2-norm ratio ||a - b|| / ||b||."""
    a = np.asarray(sol_a, dtype=float).ravel()
    b = np.asarray(sol_b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("fields must have identical shapes")
    denom = np.linalg.norm(b)
    if denom == 0.0:
        raise ZeroDivisionError("reference field has zero norm")
    return float(np.linalg.norm(a - b) / denom)


class Spot2DSystem:
    """Packs the 2D fields into the DAE state vector [h; p; c] and
    provides the residual, mass mask, dense-output selection and the
    spectral preconditioner."""

    def __init__(self, grid: PeriodicGrid, J: np.ndarray, params: ModelParams,
                 dealias: bool = False):
        J = np.asarray(J, dtype=float)
        if J.shape != grid.shape:
            raise ValueError("J does not match the grid")
        self.grid = grid
        self.J = J
        self.params = params
        self.dealias_mask = spectral_dealias_mask(grid) if dealias else None
        mn = grid.size
        self.mn = mn
        self.n = 3 * mn
        self.mass = np.concatenate([np.ones(mn), np.zeros(mn), np.ones(mn)])
        # dense output stores the differential fields h and c
        self.dense_sel = np.r_[0:mn, 2 * mn : 3 * mn]

    def unpack(self, y: np.ndarray):
        mn, shape = self.mn, self.grid.shape
        return (
            y[:mn].reshape(shape),
            y[mn : 2 * mn].reshape(shape),
            y[2 * mn :].reshape(shape),
        )

    def pack(self, h: np.ndarray, p: np.ndarray, c: np.ndarray) -> np.ndarray:
        return np.concatenate([h.ravel(), p.ravel(), c.ravel()])

    def unpack_dense(self, y_sel: np.ndarray):
        mn, shape = self.mn, self.grid.shape
        return y_sel[:mn].reshape(shape), y_sel[mn:].reshape(shape)

    def fun(self, t: float, y: np.ndarray) -> np.ndarray:
        fields = y.reshape((3,) + self.grid.shape)
        return residual_packed(fields, self.J, self.params, self.grid,
                               self.dealias_mask).reshape(-1)

    def p_from_h(self, h: np.ndarray) -> np.ndarray:
        """Pressure slaved to the film curvature, p = -lap(h)."""
        return sfft.irfft2(-self.grid.k2 * sfft.rfft2(h), s=self.grid.shape)

    def consistent_initial(self, state: FieldState):
        """Initial vector with p slaved to -lap(h) and the matching
        derivative (pdot follows from differentiating the constraint)."""
        h0 = np.asarray(state.h, dtype=float)
        c0 = np.asarray(state.c, dtype=float)
        p0 = self.p_from_h(h0)
        out = residual_packed(np.stack([h0, p0, c0]), self.J, self.params,
                              self.grid, self.dealias_mask)
        y0 = self.pack(h0, p0, c0)
        ydot0 = self.pack(out[0], self.p_from_h(out[0]), out[2])
        return y0, ydot0

    def breakup_indicator(self, y: np.ndarray) -> float:
        return float(y[: self.mn].min())

    def indicator_dense(self, y_sel: np.ndarray) -> float:
        return float(y_sel[: self.mn].min())

    def state_from_dense(self, t: float, y_sel: np.ndarray,
                         f_sel: np.ndarray | None = None) -> FieldState:
        h, c = self.unpack_dense(y_sel)
        f = None if f_sel is None else f_sel.reshape(self.grid.shape)
        return FieldState(h=h.copy(), p=self.p_from_h(h), c=c.copy(), f=f, t=t)

    def algebraic_defect(self, y: np.ndarray) -> float:
        h, p, _ = self.unpack(y)
        return float(np.abs(p - self.p_from_h(h)).max())

    def precond_factory(self, c: float, y: np.ndarray):
        """Approximate inverse of (M - c*J) from the frozen-coefficient
        linearization, block-diagonal per Fourier mode."""
        grid, params = self.grid, self.params
        h = y[: self.mn]
        mbar = float(np.mean(h**3)) / 12.0
        s2 = grid.k2
        w = 1.0 - c * s2 / params.Pe_c
        g = 1.0 / (1.0 + c * mbar * s2 * s2)
        shape = grid.shape

        def apply(v: np.ndarray) -> np.ndarray:
            R = sfft.rfft2(v.reshape((3,) + shape), axes=(-2, -1))
            Xh, Xp, Xc = kernels.precond_apply(
                s2, w, g, mbar, c, params.Pc, R[0], R[1], R[2]
            )
            return sfft.irfft2(
                np.stack([Xh, Xp, Xc]), s=shape, axes=(-2, -1)
            ).reshape(-1)

        return apply


def _make_newton(system, config: IntegratorConfig):
    kind = config.lin_solver
    if kind == "auto":
        has_precond = hasattr(system, "precond_factory")
        kind = "krylov" if (system.n >= _KRYLOV_CUTOFF and has_precond) else "dense"
    if kind == "krylov":
        return KrylovNewton(
            system.n,
            system.mass,
            system.precond_factory,
            lin_rtol=config.lin_rtol,
            restart=config.gmres_restart,
        )
    return DenseNewton(system.n)


def run_dae(system, y0, ydot0, config: IntegratorConfig, t0: float = 0.0):
    """Drive the NDF solver over [t0, t_end] with breakup detection.

    Returns (chain, status): ``chain`` is the dense PolyChain over the
    system's dense_sel rows (None unless store_history), ``status``
    carries the event, failure, timing and diagnostic data.
    """
    newton = _make_newton(system, config)
    dense_sel = getattr(system, "dense_sel", None)
    solver = NdfSolver(
        system.fun,
        t0,
        y0,
        t_bound=config.t_end,
        mass=system.mass,
        newton=newton,
        rtol=config.rtol,
        atol=config.atol,
        max_order=config.max_order,
        first_step=config.initial_dt,
        max_step=config.max_step,
        ydot0=ydot0,
        use_bdf=config.use_bdf,
        dense_sel=dense_sel,
    )
    sel = solver.dense_sel
    chain = PolyChain(t0, y0[sel]) if config.store_history else None
    walls = [0.0]
    defects = []
    start = time.perf_counter()
    tbut = None
    halted = "t_end"
    failure_message = None
    threshold = config.tbu_threshold
    has_defect = hasattr(system, "algebraic_defect")
    t_final, y_final_dense = t0, y0[sel].copy()

    while solver.status == "running":
        msg = solver.step()
        if msg is not None:
            halted = "failure"
            failure_message = msg
            break
        walls.append(time.perf_counter() - start)
        seg = solver.last_segment
        if chain is not None:
            chain.append(seg)
        if has_defect:
            defects.append(system.algebraic_defect(solver.y))
        t_final, y_final_dense = solver.t, solver.y[sel]
        if config.detect_breakup and system.breakup_indicator(solver.y) <= threshold:

            def g(tq):
                return system.indicator_dense(seg(tq)) - threshold

            if g(seg.t_old) <= 0.0:
                t_star = seg.t_old
            else:
                t_star = brentq(g, seg.t_old, seg.t_new, xtol=1e-12,
                                rtol=8 * np.finfo(float).eps)
            if chain is not None:
                chain.truncate_at(t_star)
            t_final, y_final_dense = t_star, seg(t_star)
            tbut = t_star
            halted = "event"
            break

    status = {
        "tbut": tbut,
        "halted_reason": halted,
        "failure_message": failure_message,
        "step_walls": np.asarray(walls),
        "constraint_defects": np.asarray(defects),
        "nsteps": solver.nsteps,
        "nfev": solver.nfev,
        "wall_time": time.perf_counter() - start,
        "final": (t_final, y_final_dense),
    }
    return chain, status


class FStageSystem:
    """Fluorescein transport driven by the stored (h, c) history; the
    pressure is recomputed from the interpolated thickness."""

    def __init__(self, hpc_system: Spot2DSystem, history: PolyChain):
        self.hpc = hpc_system
        self.grid = hpc_system.grid
        self.J = hpc_system.J
        self.params = hpc_system.params
        self.history = history
        self.n = self.grid.size
        self.mass = np.ones(self.n)
        self.dense_sel = np.arange(self.n)

    def _coeffs(self, t: float):
        h, c = self.hpc.unpack_dense(self.history(t))
        return h, self.hpc.p_from_h(h), c

    def fun(self, t: float, yf: np.ndarray) -> np.ndarray:
        f = yf.reshape(self.grid.shape)
        h, p, c = self._coeffs(t)
        return residual_f(h, p, f, c, self.J, self.params, self.grid).ravel()

    def breakup_indicator(self, yf: np.ndarray) -> float:  # no event in stage 2
        return np.inf

    def precond_factory(self, c: float, y: np.ndarray):
        grid, params = self.grid, self.params
        w = 1.0 - c * grid.k2 / params.Pe_f

        def apply(v: np.ndarray) -> np.ndarray:
            V = sfft.rfft2(v.reshape(grid.shape))
            return sfft.irfft2(V / w, s=grid.shape).ravel()

        return apply


def solve_f_stage(
    history: PolyChain,
    hpc_system: Spot2DSystem,
    config: IntegratorConfig,
    f0: np.ndarray | None = None,
) -> PolyChain:
    """Integrate the fluorescein equation over the span of ``history``.

    The (h, p, c) fields are interpolated from the stored first-stage
    steps; the dye inherits the same tolerance regime.
    """
    if history is None or len(history) < 2:
        raise ValueError("f stage requires a stored (h, c) history")
    system = FStageSystem(hpc_system, history)
    if f0 is None:
        f0 = hpc_system.params.f0 * np.ones(system.grid.shape)
    y0 = np.asarray(f0, dtype=float).ravel()
    ydot0 = system.fun(history.t_min, y0)
    fconfig = config.with_(
        t_end=history.t_max,
        detect_breakup=False,
        store_history=True,
    )
    f_history, status = run_dae(system, y0, ydot0, fconfig, t0=history.t_min)
    if status["halted_reason"] == "failure":
        raise RuntimeError(f"f stage failed: {status['failure_message']}")
    return f_history


def _snapshot_times(config: IntegratorConfig, t_final: float) -> np.ndarray:
    if config.snapshot_times is not None:
        ts = np.asarray(config.snapshot_times, dtype=float)
        ts = ts[(ts >= 0.0) & (ts <= t_final + 1e-12)]
    elif config.snapshot_cadence is not None:
        ts = np.arange(0.0, t_final + 1e-12, config.snapshot_cadence)
    else:
        ts = np.array([0.0])
    if ts.size == 0 or abs(ts[-1] - t_final) > 1e-12:
        ts = np.append(ts, t_final)
    return ts


def build_traces(
    times: np.ndarray,
    history: PolyChain,
    f_history: PolyChain | None,
    system: Spot2DSystem,
    probes: np.ndarray,
) -> dict[str, np.ndarray]:
    """Probe time series of the fields, intensity and the osmolarity
    mechanism terms, evaluated on the trigonometric interpolant."""
    grid, params, J = system.grid, system.params, system.J
    names = ["h", "p", "c", "f", "I",
             "advection", "diffusion", "evaporation", "osmosis"]
    out = {name: np.full((times.size, len(probes)), np.nan) for name in names}
    for i, t in enumerate(times):
        h, c = system.unpack_dense(history(t))
        p = system.p_from_h(h)
        fields = {"h": h, "p": p, "c": c}
        if f_history is not None:
            f = f_history(t).reshape(grid.shape)
            fields["f"] = f
            fields["I"] = fl_intensity(h, f, params)
        fields.update(mechanism_terms(h, p, c, J, params, grid))
        for name, arr in fields.items():
            out[name][i] = eval_at_points(arr, grid, probes)
    return out


def integrate(
    initial: FieldState,
    J: np.ndarray,
    params: ModelParams,
    config: IntegratorConfig,
    grid: PeriodicGrid,
    probes=((0.0, 0.0),),
) -> SolutionRecord:
    """Advance the tear-film DAE from ``initial`` until breakup, t_end,
    or solver failure.  The supplied pressure is replaced by the
    consistent value -lap(h) before stepping.
    """
    system = Spot2DSystem(grid, J, params, dealias=config.dealias)
    y0, ydot0 = system.consistent_initial(initial)
    history, status = run_dae(system, y0, ydot0, config, t0=initial.t)

    f_history = None
    if config.solve_f and history is not None and len(history) >= 2 \
            and status["halted_reason"] != "failure":
        f0 = initial.f if initial.f is not None else None
        f_history = solve_f_stage(history, system, config, f0=f0)

    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    t_final = status["final"][0]
    if history is not None:
        times = history.t
        traces = build_traces(times, history, f_history, system, probes)
    else:
        times = np.array([initial.t, t_final])
        traces = {}

    snapshots = []
    if history is not None:
        for ts in _snapshot_times(config, t_final):
            f_sel = f_history(ts) if f_history is not None else None
            snapshots.append(system.state_from_dense(float(ts), history(ts), f_sel))
    else:
        h, c = system.unpack_dense(status["final"][1])
        snapshots.append(FieldState(h=h, p=system.p_from_h(h), c=c, f=None,
                                    t=t_final))

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
