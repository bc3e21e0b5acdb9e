"""NDF integrator core and the 2D tear-film driver."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

import tearfilm as tf
from tearfilm.dae import Spot2DSystem, integrate, relative_error, run_dae
from tearfilm.model import total_solute
from tearfilm.ndf import DenseNewton, NdfSolver


def uniform_field_oracle(v_b, Pc, t_end):
    """Reference (h, c) trajectory for spatially uniform evaporation,
    by high-accuracy explicit Runge-Kutta."""

    def rhs(t, y):
        h, c = y
        return [-v_b + Pc * (c - 1), (v_b * c - Pc * (c - 1) * c) / h]

    return solve_ivp(rhs, [0, t_end], [1.0, 1.0], rtol=1e-12, atol=1e-13,
                     method="DOP853")


class TestNdfCore:
    def test_linear_dae(self):
        # y1' = -y1 + y2, 0 = y2 - sin(t); exact y1 known
        def fun(t, y):
            return np.array([-y[0] + y[1], y[1] - np.sin(t)])

        solver = NdfSolver(fun, 0.0, np.array([1.0, 0.0]), 3.0,
                           np.array([1.0, 0.0]), DenseNewton(2),
                           rtol=1e-8, atol=1e-10, first_step=1e-6)
        while solver.status == "running":
            assert solver.step() is None
        t = solver.t
        exact = 1.5 * np.exp(-t) + (np.sin(t) - np.cos(t)) / 2
        assert abs(solver.y[0] - exact) < 1e-6
        assert abs(solver.y[1] - np.sin(t)) < 1e-12

    def test_robertson_dae_against_ode_form(self):
        # classic stiff kinetics; DAE form (conservation as constraint)
        # against the pure ODE form solved by scipy BDF at tight tolerance
        def dae(t, y):
            return np.array([
                -0.04 * y[0] + 1e4 * y[1] * y[2],
                0.04 * y[0] - 1e4 * y[1] * y[2] - 3e7 * y[1] ** 2,
                y[0] + y[1] + y[2] - 1.0,
            ])

        def ode(t, y):
            r1 = -0.04 * y[0] + 1e4 * y[1] * y[2]
            r3 = 3e7 * y[1] ** 2
            return [r1, -r1 - r3, r3]

        ref = solve_ivp(ode, [0, 100.0], [1.0, 0.0, 0.0], method="BDF",
                        rtol=1e-10, atol=1e-12)
        solver = NdfSolver(dae, 0.0, np.array([1.0, 0.0, 0.0]), 100.0,
                           np.array([1.0, 1.0, 0.0]), DenseNewton(3),
                           rtol=1e-8, atol=1e-12, first_step=1e-6)
        while solver.status == "running":
            assert solver.step() is None
        assert np.allclose(solver.y, ref.y[:, -1], rtol=1e-5, atol=1e-10)

    def test_rejects_bad_tolerances(self):
        with pytest.raises(ValueError):
            NdfSolver(lambda t, y: y, 0.0, np.ones(1), 1.0, np.ones(1),
                      DenseNewton(1), rtol=-1.0)


class TestRelativeError:
    def test_identical(self):
        a = np.random.default_rng(0).standard_normal((5, 5))
        assert relative_error(a, a) == 0.0

    def test_scaling(self):
        b = np.random.default_rng(1).standard_normal(40)
        assert relative_error(1.01 * b, b) == pytest.approx(0.01)

    def test_zero_reference(self):
        with pytest.raises(ZeroDivisionError):
            relative_error(np.ones(3), np.zeros(3))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            relative_error(np.ones(3), np.ones(4))


@pytest.fixture(scope="module")
def small_setup():
    params = tf.ModelParams()
    grid = tf.PeriodicGrid(16, 16)
    return params, grid


class TestUniformField:
    def test_matches_ode_oracle(self, small_setup):
        params, grid = small_setup
        v_b = 0.1
        J = np.full(grid.shape, v_b)
        cfg = tf.IntegratorConfig(t_end=2.0, detect_breakup=False, solve_f=False)
        rec = integrate(tf.uniform_state(grid, params), J, params, cfg, grid)
        ref = uniform_field_oracle(v_b, params.Pc, 2.0)
        fin = rec.final_state
        assert abs(fin.h.mean() / ref.y[0, -1] - 1) < 1e-6
        assert abs(fin.c.mean() / ref.y[1, -1] - 1) < 1e-6
        assert fin.h.std() < 1e-13

    def test_no_evaporation_steady(self, small_setup):
        params, grid = small_setup
        J = np.zeros(grid.shape)
        cfg = tf.IntegratorConfig(t_end=1.0, solve_f=False)
        rec = integrate(tf.uniform_state(grid, params), J, params, cfg, grid)
        assert rec.halted_reason == "t_end"
        assert rec.tbut is None
        fin = rec.final_state
        assert np.abs(fin.h - 1).max() < 1e-8
        assert np.abs(fin.c - 1).max() < 1e-8


@pytest.fixture(scope="module")
def spot_record():
    """Coarse single-spot run reused by several tests."""
    params = tf.ModelParams()
    grid = tf.PeriodicGrid(24, 24)
    J = tf.eval_J([tf.EvaporationPeak(a=1.0, widths=(0.5, 0.5))], 0.1, grid)
    cfg = tf.IntegratorConfig(t_end=6.0, lin_solver="krylov")
    rec = integrate(tf.uniform_state(grid, params), J, params, cfg, grid)
    return params, grid, cfg, J, rec


class TestSpotRun:
    def test_breakup_event(self, spot_record):
        params, grid, cfg, J, rec = spot_record
        assert rec.halted_reason == "event"
        # coarse-grid value; the production-grid TBUT is pinned in the
        # acceptance suite
        assert rec.tbut == pytest.approx(2.4, abs=0.1)

    def test_event_location_on_threshold(self, spot_record):
        params, grid, cfg, J, rec = spot_record
        fin = rec.final_state
        tol = cfg.atol + cfg.rtol * cfg.tbu_threshold
        assert abs(fin.h.min() - cfg.tbu_threshold) < tol

    def test_times_strictly_increasing(self, spot_record):
        rec = spot_record[-1]
        assert np.all(np.diff(rec.times) > 0)

    def test_algebraic_constraint_at_steps(self, spot_record):
        rec = spot_record[-1]
        assert rec.constraint_defects.max() < 1e-6

    def test_solute_conservation(self, spot_record):
        params, grid, cfg, J, rec = spot_record
        s0, s1 = rec.snapshots[0], rec.snapshots[-1]
        for attr in ("c", "f"):
            m0 = total_solute(s0.h, getattr(s0, attr), grid)
            m1 = total_solute(s1.h, getattr(s1, attr), grid)
            assert abs(m1 / m0 - 1) < 1e-5

    def test_f_independent_of_f0(self, spot_record):
        # (h, p, c) must be bitwise identical when f0 changes
        params, grid, cfg, J, rec = spot_record
        params2 = params.with_(f0=0.37)
        rec2 = integrate(tf.uniform_state(grid, params2), J, params2, cfg, grid)
        assert rec2.tbut == rec.tbut
        assert np.array_equal(rec2.final_state.h, rec.final_state.h)
        assert np.array_equal(rec2.final_state.c, rec.final_state.c)
        assert not np.array_equal(rec2.final_state.f, rec.final_state.f)

    def test_determinism(self, spot_record):
        params, grid, cfg, J, rec = spot_record
        rec2 = integrate(tf.uniform_state(grid, params), J, params, cfg, grid)
        assert rec2.tbut == rec.tbut
        assert np.array_equal(rec2.final_state.h, rec.final_state.h)
        assert np.array_equal(rec2.traces["c"], rec.traces["c"])

    def test_quadrant_symmetry(self, spot_record):
        params, grid, cfg, J, rec = spot_record
        h = rec.final_state.h
        # node set maps onto itself under reflection through the origin
        def reflect(a, axis):
            out = np.flip(a, axis=axis)
            return np.roll(out, 1, axis=axis)

        scale = np.abs(h).max()
        assert np.abs(h - reflect(h, 0)).max() < 1e-9 * scale
        assert np.abs(h - reflect(h, 1)).max() < 1e-9 * scale
        assert np.abs(h - h.T).max() < 1e-9 * scale

    def test_water_balance(self, spot_record):
        # d/dt int(h) equals int(-J + Pc(c-1)): finite differences of
        # int(h) between accepted steps against composite Simpson
        # quadrature of the right side over the same window.  Windows of
        # several steps keep the finite difference well conditioned
        # where the controller takes very small steps.
        params, grid, cfg, J, rec = spot_record
        times = rec.times
        sys_ = rec.system
        area = (2 * np.pi) ** 2
        intJ = J.mean() * area

        def mass_and_rhs(t):
            y = rec.history(t)
            h, c = sys_.unpack_dense(y)
            return h.mean() * area, -intJ + params.Pc * (c - 1).mean() * area

        width = 8
        starts = np.unique(np.linspace(1, times.size - 1 - width, 20, dtype=int))
        for i0 in starts:
            window = times[i0 : i0 + width + 1]
            m_start, _ = mass_and_rhs(window[0])
            m_end, _ = mass_and_rhs(window[-1])
            quad = 0.0
            for ta, tb in zip(window[:-1], window[1:]):
                _, ra = mass_and_rhs(ta)
                _, rb = mass_and_rhs(tb)
                _, rm = mass_and_rhs(0.5 * (ta + tb))
                quad += (tb - ta) * (ra + 4 * rm + rb) / 6
            span = window[-1] - window[0]
            lhs = (m_end - m_start) / span
            rhs = quad / span
            assert abs(lhs - rhs) < 1e-4 * abs(rhs)


class TestToleranceMonotonicity:
    def test_discrepancy_never_increases(self):
        params = tf.ModelParams()
        grid = tf.PeriodicGrid(16, 16)
        J = tf.eval_J([tf.EvaporationPeak(a=1.0, widths=(0.5, 0.5))], 0.1, grid)
        t_eval = 1.5

        def run(rtol, atol):
            cfg = tf.IntegratorConfig(t_end=t_eval, rtol=rtol, atol=atol,
                                      detect_breakup=False, solve_f=False,
                                      lin_solver="krylov")
            rec = integrate(tf.uniform_state(grid, params), J, params, cfg, grid)
            return rec.final_state

        ref = run(1e-9, 1e-11)
        errs = []
        for rtol, atol in [(1e-4, 1e-6), (1e-5, 1e-7), (1e-6, 1e-8)]:
            fin = run(rtol, atol)
            errs.append(relative_error(fin.h, ref.h) + relative_error(fin.c, ref.c))
        assert errs[1] <= errs[0]
        assert errs[2] <= errs[1]


class TestStateInvariants:
    def test_fields_positive_and_pressure_centered(self, spot_record):
        params, grid, cfg, J, rec = spot_record
        for state in rec.snapshots:
            assert state.h.min() > 0
            assert state.c.min() > 0
            assert state.f.min() > 0
            assert abs(state.p.mean()) < 1e-10
