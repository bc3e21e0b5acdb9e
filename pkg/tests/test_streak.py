"""Periodic streak solver: breakup time, conservation, symmetry."""

import numpy as np
import pytest

import tearfilm as tf
from tearfilm.spectral import PeriodicLine
from tearfilm.streak import eval_J_line, integrate_streak, streak_total_solute


@pytest.fixture(scope="module")
def streak_run():
    params = tf.ModelParams()
    cfg = tf.IntegratorConfig(t_end=6.0)
    rec = integrate_streak((1.0, 0.5), 0.1, params, cfg, PeriodicLine(192))
    return params, cfg, rec


class TestEvaporationProfile:
    def test_values(self):
        line = PeriodicLine(64)
        J = eval_J_line(1.0, 0.5, 0.1, line)
        i0 = line.n // 2
        assert J[i0] == pytest.approx(1.0)
        assert J[0] == pytest.approx(0.1, abs=1e-8)

    def test_validation(self):
        line = PeriodicLine(64)
        with pytest.raises(ValueError):
            eval_J_line(0.05, 0.5, 0.1, line)


class TestStreakDynamics:
    def test_breakup_time(self, streak_run):
        _, _, rec = streak_run
        assert rec.halted_reason == "event"
        assert rec.tbut == pytest.approx(1.87, abs=0.03)

    def test_steady_without_evaporation_contrast(self):
        # a -> v_b: uniform thinning, no breakup before t_end at this
        # baseline
        params = tf.ModelParams()
        cfg = tf.IntegratorConfig(t_end=1.0, solve_f=False)
        rec = integrate_streak((0.1 * (1 + 1e-12), 0.5), 0.1, params, cfg,
                               PeriodicLine(64))
        assert rec.halted_reason == "t_end"
        fin = rec.final_state
        assert fin.h.std() < 1e-10

    def test_solute_conservation(self, streak_run):
        _, _, rec = streak_run
        s0, s1 = rec.snapshots[0], rec.snapshots[-1]
        for attr in ("c", "f"):
            m0 = streak_total_solute(s0.h, getattr(s0, attr), rec.grid)
            m1 = streak_total_solute(s1.h, getattr(s1, attr), rec.grid)
            assert abs(m1 / m0 - 1) < 1e-5

    def test_mirror_symmetry(self, streak_run):
        _, _, rec = streak_run
        fin = rec.final_state
        for field in (fin.h, fin.c, fin.f):
            reflected = np.roll(field[::-1], 1)
            assert np.abs(field - reflected).max() < 1e-9 * np.abs(field).max()

    def test_minimum_at_center(self, streak_run):
        _, _, rec = streak_run
        fin = rec.final_state
        line = rec.grid
        assert line.x[np.argmin(fin.h)] == pytest.approx(0.0, abs=line.dx)

    def test_resolution_independence(self, streak_run):
        params, cfg, rec = streak_run
        rec2 = integrate_streak((1.0, 0.5), 0.1, params, cfg, PeriodicLine(128))
        assert abs(rec2.tbut - rec.tbut) < 1e-3


def test_limit_consistency_with_widening_ellipses(streak_run):
    # 2D center traces approach the streak monotonically as y_w grows
    params, cfg, stk = streak_run
    grid = tf.PeriodicGrid(32, 32)
    from tearfilm.dae import integrate

    def discrepancy(y_w):
        J = tf.eval_J([tf.EvaporationPeak(a=1.0, widths=(0.5, y_w))], 0.1, grid)
        rec = integrate(tf.uniform_state(grid, params), J, params,
                        cfg.with_(lin_solver="krylov"), grid)
        t_hi = min(rec.times[-1], stk.times[-1])
        ts = np.linspace(0.05 * t_hi, t_hi, 100)
        total = 0.0
        for v in ("h", "c"):
            a = np.interp(ts, rec.times, rec.traces[v][:, 0])
            b = np.interp(ts, stk.times, stk.traces[v][:, 0])
            total += np.linalg.norm(a - b) / np.linalg.norm(b)
        return total

    d = [discrepancy(y_w) for y_w in (1.0, 2.0, 4.0)]
    assert d[0] > d[1] > d[2]
