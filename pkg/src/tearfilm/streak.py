"""One-dimensional periodic streak model.

The limit of an evaporation ellipse stretched to infinite width in y:
the same film/osmolarity/fluorescein system on a periodic line, with
p = -h_xx.  Shares the NDF integrator and record machinery with the 2D
solver; used as a comparison target for the spot-to-streak transition
studies.
"""

from __future__ import annotations

import numpy as np

from .dae import IntegratorConfig, SolutionRecord, run_dae, _snapshot_times
from .model import FieldState, ModelParams, fl_intensity, H_FLOOR
from .ndf import PolyChain
from .spectral import PeriodicLine, deriv_line, eval_line_at_points, integrate_line

__all__ = ["eval_J_line", "StreakSystem", "integrate_streak"]


def eval_J_line(a: float, x_w: float, v_b: float, line: PeriodicLine) -> np.ndarray:
    """Evaporation profile J(x) = v_b + (a - v_b) exp(-(x/x_w)^2 / 2)."""
    if a <= v_b:
        raise ValueError("peak height must exceed the baseline")
    if x_w <= 0:
        raise ValueError("peak width must be positive")
    return v_b + (a - v_b) * np.exp(-((line.x / x_w) ** 2) / 2.0)


class StreakSystem:
    """DAE assembly for the 1D periodic model: state [h; p; c]."""

    def __init__(self, line: PeriodicLine, J: np.ndarray, params: ModelParams):
        self.line = line
        self.J = np.asarray(J, dtype=float)
        self.params = params
        n = line.n
        self.nn = n
        self.n = 3 * n
        self.mass = np.concatenate([np.ones(n), np.zeros(n), np.ones(n)])
        self.dense_sel = np.r_[0:n, 2 * n : 3 * n]

    def unpack(self, y: np.ndarray):
        n = self.nn
        return y[:n], y[n : 2 * n], y[2 * n :]

    def unpack_dense(self, y_sel: np.ndarray):
        n = self.nn
        return y_sel[:n], y_sel[n:]

    def p_from_h(self, h: np.ndarray) -> np.ndarray:
        return -deriv_line(h, self.line, 2)

    def fun(self, t: float, y: np.ndarray) -> np.ndarray:
        line, params, J = self.line, self.params, self.J
        h, p, c = self.unpack(y)
        if h.min() < H_FLOOR:
            return np.full(self.n, np.nan)
        px = deriv_line(p, line)
        cx = deriv_line(c, line)
        q = -(h**3 / 12.0) * px
        divq = deriv_line(q, line)
        lap_h = deriv_line(h, line, 2)
        div_hcx = deriv_line(h * cx, line)
        r_h = -divq - J + params.Pc * (c - 1.0)
        r_p = p + lap_h
        r_c = (
            (h * h / 12.0) * px * cx
            + div_hcx / (h * params.Pe_c)
            + (J * c - params.Pc * (c - 1.0) * c) / h
        )
        return np.concatenate([r_h, r_p, r_c])

    def fun_f(self, t: float, f: np.ndarray, h, p, c) -> np.ndarray:
        line, params, J = self.line, self.params, self.J
        if h.min() < H_FLOOR:
            return np.full(self.nn, np.nan)
        px = deriv_line(p, line)
        fx = deriv_line(f, line)
        div_hfx = deriv_line(h * fx, line)
        return (
            (h * h / 12.0) * px * fx
            + div_hfx / (h * params.Pe_f)
            + (J * f - params.Pc * (c - 1.0) * f) / h
        )

    def consistent_initial(self, h0: np.ndarray, c0: np.ndarray):
        p0 = self.p_from_h(h0)
        y0 = np.concatenate([h0, p0, c0])
        g = self.fun(0.0, y0)
        r_h, _, r_c = self.unpack(g)
        ydot0 = np.concatenate([r_h, self.p_from_h(r_h), r_c])
        return y0, ydot0

    def breakup_indicator(self, y: np.ndarray) -> float:
        return float(y[: self.nn].min())

    def indicator_dense(self, y_sel: np.ndarray) -> float:
        return float(y_sel[: self.nn].min())

    def state_from_dense(self, t: float, y_sel: np.ndarray,
                         f_sel: np.ndarray | None = None) -> FieldState:
        h, c = self.unpack_dense(y_sel)
        return FieldState(h=h.copy(), p=self.p_from_h(h), c=c.copy(),
                          f=None if f_sel is None else f_sel.copy(), t=t)

    def algebraic_defect(self, y: np.ndarray) -> float:
        h, p, _ = self.unpack(y)
        return float(np.abs(p - self.p_from_h(h)).max())

    def mechanisms(self, h, p, c):
        line, params, J = self.line, self.params, self.J
        px = deriv_line(p, line)
        cx = deriv_line(c, line)
        ubar = -(h * h / 12.0) * px
        return {
            "advection": ubar * cx,
            "diffusion": deriv_line(h * cx, line) / (h * params.Pe_c),
            "evaporation": J * c / h,
            "osmosis": params.Pc * (c - 1.0) * c / h,
        }


class _StreakFStage:
    """Fluorescein replay against the stored (h, c) streak history."""

    def __init__(self, system: StreakSystem, history: PolyChain):
        self.system = system
        self.history = history
        self.n = system.nn
        self.mass = np.ones(self.n)
        self.dense_sel = np.arange(self.n)

    def fun(self, t, f):
        h, c = self.system.unpack_dense(self.history(t))
        p = self.system.p_from_h(h)
        return self.system.fun_f(t, f, h, p, c)

    def breakup_indicator(self, y):
        return np.inf


def integrate_streak(
    peak: tuple[float, float],
    v_b: float,
    params: ModelParams,
    config: IntegratorConfig,
    line: PeriodicLine | None = None,
    probes=(0.0,),
) -> SolutionRecord:
    """Solve the streak model for a single Gaussian evaporation peak
    (a, x_w) centered at x = 0, from the uniform initial state."""
    if line is None:
        line = PeriodicLine(256)
    a, x_w = peak
    J = eval_J_line(a, x_w, v_b, line)
    system = StreakSystem(line, J, params)
    h0 = np.ones(line.n)
    c0 = np.ones(line.n)
    y0, ydot0 = system.consistent_initial(h0, c0)
    config = config.with_(lin_solver="dense", store_history=True)
    history, status = run_dae(system, y0, ydot0, config)

    f_history = None
    if config.solve_f and status["halted_reason"] != "failure" and len(history) >= 2:
        fstage = _StreakFStage(system, history)
        f0 = params.f0 * np.ones(line.n)
        fcfg = config.with_(t_end=history.t_max, detect_breakup=False)
        f_history, fstatus = run_dae(fstage, f0, fstage.fun(0.0, f0), fcfg)
        if fstatus["halted_reason"] == "failure":
            raise RuntimeError(f"streak f stage failed: {fstatus['failure_message']}")

    probes = np.atleast_1d(np.asarray(probes, dtype=float))
    times = history.t
    names = ["h", "p", "c", "f", "I",
             "advection", "diffusion", "evaporation", "osmosis"]
    traces = {k: np.full((times.size, probes.size), np.nan) for k in names}
    for i, t in enumerate(times):
        h, c = system.unpack_dense(history(t))
        p = system.p_from_h(h)
        fields = {"h": h, "p": p, "c": c}
        if f_history is not None:
            f = f_history(t)
            fields["f"] = f
            fields["I"] = fl_intensity(h, f, params)
        fields.update(system.mechanisms(h, p, c))
        for k, arr in fields.items():
            traces[k][i] = eval_line_at_points(arr, line, probes)

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
        probe_points=probes.reshape(-1, 1),
        traces=traces,
        snapshots=snapshots,
        history=history,
        f_history=f_history,
        wall_time=status["wall_time"],
        step_walls=status["step_walls"],
        constraint_defects=status["constraint_defects"],
        nsteps=status["nsteps"],
        nfev=status["nfev"],
        grid=line,
        system=system,
    )


def streak_total_solute(h: np.ndarray, s: np.ndarray, line: PeriodicLine) -> float:
    """Integral of h*s over one period."""
    return integrate_line(h * s, line)
