"""POD reduction: basis construction, projection properties, reduced
integration and the radial snapshot shortcut."""

import numpy as np
import pytest

import tearfilm as tf
from tearfilm.dae import integrate
from tearfilm.pod import (
    PodBasis,
    SnapshotSet,
    build_basis,
    capture_snapshots,
    compare_records,
    compute_basis,
    default_ranks,
    integrate_reduced,
    radial_snapshot_basis,
)


@pytest.fixture(scope="module")
def setup24():
    params = tf.ModelParams()
    grid = tf.PeriodicGrid(24, 24)
    peak = tf.EvaporationPeak(a=1.0, widths=(0.5, 0.5))
    J = tf.eval_J([peak], 0.1, grid)
    cfg = tf.IntegratorConfig(t_end=6.0, lin_solver="krylov")
    return params, grid, peak, J, cfg


@pytest.fixture(scope="module")
def full_run(setup24):
    params, grid, peak, J, cfg = setup24
    return integrate(tf.uniform_state(grid, params), J, params, cfg, grid)


@pytest.fixture(scope="module")
def snapshots(setup24):
    params, grid, peak, J, cfg = setup24
    return capture_snapshots(tf.uniform_state(grid, params), J, params, cfg,
                             grid, tau=0.5, count=50, include_f=True)


class TestComputeBasis:
    def test_repeated_column_rank_one(self):
        col = np.random.default_rng(0).standard_normal(64)
        S = np.tile(col[:, None], (1, 10))
        B, svals = compute_basis(S, 1)
        assert np.linalg.norm(S - B @ (B.T @ S)) < 1e-12
        assert svals[1] < 1e-12 * svals[0]

    def test_full_rank_exact(self):
        S = np.random.default_rng(1).standard_normal((30, 8))
        B, _ = compute_basis(S, 8)
        assert np.linalg.norm(S - B @ (B.T @ S)) < 1e-12

    def test_frobenius_tail_identity(self):
        S = np.random.default_rng(2).standard_normal((40, 12))
        for k in (1, 4, 9):
            B, svals = compute_basis(S, k)
            err2 = np.linalg.norm(S - B @ (B.T @ S), "fro") ** 2
            assert err2 == pytest.approx(np.sum(svals[k:] ** 2), rel=1e-10)

    def test_rank_validation(self):
        S = np.zeros((10, 4))
        with pytest.raises(ValueError):
            compute_basis(S, 0)
        with pytest.raises(ValueError):
            compute_basis(S, 5)

    def test_monotone_rank_quality(self):
        S = np.random.default_rng(3).standard_normal((50, 15))
        errs = []
        for k in range(1, 16):
            B, _ = compute_basis(S, k)
            errs.append(np.linalg.norm(S - B @ (B.T @ S), "fro"))
        assert all(e1 <= e0 + 1e-12 for e0, e1 in zip(errs, errs[1:]))

    def test_orthonormal(self, snapshots):
        basis = build_basis(snapshots, (10, 15, 10))
        for B in (basis.Bh, basis.Bp, basis.Bc, basis.Bf):
            gram = B.T @ B
            assert np.abs(gram - np.eye(B.shape[1])).max() < 1e-12

    def test_projector_idempotence(self, snapshots):
        basis = build_basis(snapshots, (10, 15, 10))
        v = np.random.default_rng(4).standard_normal(basis.Bh.shape[0])
        once = basis.Bh @ (basis.Bh.T @ v)
        twice = basis.Bh @ (basis.Bh.T @ once)
        assert np.abs(once - twice).max() < 1e-12


class TestSnapshotCapture:
    def test_validation(self):
        with pytest.raises(ValueError):
            SnapshotSet(times=np.array([0.0]), matrices={}, grid_shape=(8, 8))
        with pytest.raises(ValueError):
            SnapshotSet(times=np.array([0.1, 0.2]),
                        matrices={"h": np.zeros((64, 2))}, grid_shape=(8, 8))

    def test_uniform_run_rank_one(self, setup24):
        # without an evaporation contrast all snapshot columns coincide
        params, grid, peak, J, cfg = setup24
        J0 = np.full(grid.shape, 0.1)
        snaps = capture_snapshots(tf.uniform_state(grid, params), J0, params,
                                  cfg, grid, tau=0.3, count=10)
        _, svals = compute_basis(snaps.matrices["c"], 1)
        assert svals[1] < 1e-8 * svals[0]

    def test_breakup_before_tau_rejected(self, setup24):
        params, grid, peak, J, cfg = setup24
        with pytest.raises(RuntimeError, match="before tau"):
            capture_snapshots(tf.uniform_state(grid, params), J, params, cfg,
                              grid, tau=5.0, count=10)

    def test_default_ranks_table(self):
        assert default_ranks(0.25) == ((15, 25, 15), 40)
        assert default_ranks(0.5) == ((20, 30, 20), 50)
        assert default_ranks(1.0) == ((40, 50, 40), 100)


class TestReducedIntegration:
    def test_tracks_full_solution(self, setup24, full_run, snapshots):
        params, grid, peak, J, cfg = setup24
        basis = build_basis(snapshots, (20, 30, 20))
        red = integrate_reduced(basis, tf.uniform_state(grid, params), J,
                                params, cfg, grid)
        assert red.halted_reason == "event"
        assert red.tbut == pytest.approx(full_run.tbut, abs=0.05)
        tcomp = np.linspace(0.05, min(full_run.times[-1], red.times[-1]), 25)
        errs = compare_records(red, full_run, tcomp)
        assert np.nanmax(errs["h"]) < 0.10
        assert np.nanmax(errs["c"]) < 0.10

    def test_full_span_basis_matches_solver(self, setup24):
        # snapshots densely covering the whole (short) horizon with full
        # rank: the reduced model reproduces the full solution
        params, grid, peak, J, cfg = setup24
        short = cfg.with_(t_end=1.0, detect_breakup=False)
        snaps = capture_snapshots(tf.uniform_state(grid, params), J, params,
                                  short, grid, tau=1.0, count=40,
                                  include_f=True)
        basis = build_basis(snaps, (40, 40, 40))
        full = integrate(tf.uniform_state(grid, params), J, params, short, grid)
        red = integrate_reduced(basis, tf.uniform_state(grid, params), J,
                                params, short, grid)
        tcomp = np.linspace(0.1, 1.0, 10)
        errs = compare_records(red, full, tcomp, variables=("h", "c"))
        assert np.nanmax(errs["h"]) < 1e-3
        assert np.nanmax(errs["c"]) < 1e-3

    def test_consistency_inside_snapshot_window(self, setup24, full_run,
                                                snapshots):
        # lifted reduced solution tracks the full one within the window
        # that generated the basis
        params, grid, peak, J, cfg = setup24
        basis = build_basis(snapshots, (20, 30, 20))
        red = integrate_reduced(basis, tf.uniform_state(grid, params), J,
                                params, cfg, grid)
        tcomp = np.linspace(0.05, 0.5, 10)
        errs = compare_records(red, full_run, tcomp, variables=("h", "c"))
        assert np.nanmax(errs["h"]) < 1e-3
        assert np.nanmax(errs["c"]) < 1e-3

    def test_grid_mismatch_rejected(self, snapshots):
        basis = build_basis(snapshots, (5, 5, 5))
        params = tf.ModelParams()
        other = tf.PeriodicGrid(16, 16)
        J = np.full(other.shape, 0.1)
        with pytest.raises(ValueError, match="different grid"):
            integrate_reduced(basis, tf.uniform_state(other, params), J,
                              params, tf.IntegratorConfig(), other)


class TestRadialBasis:
    def test_single_spot_cross_validation(self, setup24, full_run):
        # radial-snapshot basis solves a circular spot about as well as
        # the 2D-snapshot basis
        params, grid, peak, J, cfg = setup24
        basis = radial_snapshot_basis([peak], 0.1, params, cfg, grid,
                                      tau=3.0, count=80, ranks=(20, 30, 20),
                                      include_f=True)
        red = integrate_reduced(basis, tf.uniform_state(grid, params), J,
                                params, cfg, grid)
        assert red.tbut == pytest.approx(full_run.tbut, abs=0.05)
        tcomp = np.linspace(0.05, min(full_run.times[-1], red.times[-1]), 20)
        errs = compare_records(red, full_run, tcomp, variables=("h", "c"))
        assert np.nanmax(errs["h"]) < 0.10
        assert np.nanmax(errs["c"]) < 0.10

    def test_noncircular_peak_rejected(self, setup24):
        params, grid, peak, J, cfg = setup24
        bad = tf.EvaporationPeak(a=1.0, widths=(0.25, 1.0))
        with pytest.raises(ValueError, match="circular"):
            radial_snapshot_basis([bad], 0.1, params, cfg, grid)


class TestBasisIO:
    def test_roundtrip(self, snapshots, tmp_path):
        basis = build_basis(snapshots, (8, 12, 8))
        path = tmp_path / "basis.podz"
        basis.save(path)
        loaded = PodBasis.load(path)
        assert loaded.ranks == basis.ranks
        assert loaded.grid_shape == basis.grid_shape
        for a, b in zip(basis._arrays().values(), loaded._arrays().values()):
            assert np.array_equal(a, b)

    def test_header_is_plain_text(self, snapshots, tmp_path):
        import json
        import zipfile

        basis = build_basis(snapshots, (8, 12, 8))
        path = tmp_path / "basis.podz"
        basis.save(path)
        with zipfile.ZipFile(path) as zf:
            header = json.loads(zf.read("header.json").decode())
        assert header["ranks"][:3] == [8, 12, 8]
        assert header["variables"][:3] == ["h", "p", "c"]


def test_continuation_from_tau(setup24):
    # reduced solve started from the state at tau instead of restarting
    params, grid, peak, J, cfg = setup24
    snaps = capture_snapshots(tf.uniform_state(grid, params), J, params, cfg,
                              grid, tau=0.5, count=40, include_f=True)
    basis = build_basis(snaps, (20, 30, 20))
    state_tau = snaps.record.state_at(0.5)
    red = integrate_reduced(basis, state_tau, J, params, cfg, grid)
    assert red.times[0] == pytest.approx(0.5)
    assert red.halted_reason == "event"
    assert red.tbut == pytest.approx(2.4, abs=0.1)
