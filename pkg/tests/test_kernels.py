"""Compiled and reference kernels must agree to roundoff."""

import numpy as np
import pytest

from tearfilm import kernels
from tearfilm.kernels import _reference as ref


@pytest.fixture(scope="module")
def arrays():
    rng = np.random.default_rng(99)
    shape = (20, 14)
    return {
        "h": 0.3 + rng.random(shape),
        "s": 0.5 + rng.random(shape),
        "sx": rng.standard_normal(shape),
        "sy": rng.standard_normal(shape),
        "px": rng.standard_normal(shape),
        "py": rng.standard_normal(shape),
        "div": rng.standard_normal(shape),
        "c": 1.0 + rng.random(shape),
        "J": 0.1 + rng.random(shape),
    }


def test_backend_identifies_itself():
    assert kernels.BACKEND in ("cython", "numpy")


def test_film_flux(arrays):
    a = arrays
    qx, qy = kernels.film_flux(a["h"], a["px"], a["py"])
    qx0, qy0 = ref.film_flux(a["h"], a["px"], a["py"])
    np.testing.assert_allclose(qx, qx0, rtol=0, atol=1e-15)
    np.testing.assert_allclose(qy, qy0, rtol=0, atol=1e-15)


def test_thickness_rhs(arrays):
    a = arrays
    out = kernels.thickness_rhs(a["div"], a["c"], a["J"], 0.392)
    out0 = ref.thickness_rhs(a["div"], a["c"], a["J"], 0.392)
    np.testing.assert_allclose(out, out0, rtol=0, atol=1e-15)


def test_solute_rhs(arrays):
    a = arrays
    args = (a["h"], a["s"], a["sx"], a["sy"], a["px"], a["py"], a["div"],
            a["c"], a["J"], 0.392, 6.76)
    np.testing.assert_allclose(
        kernels.solute_rhs(*args), ref.solute_rhs(*args), rtol=1e-14, atol=1e-13
    )


def test_precond_apply():
    rng = np.random.default_rng(4)
    shape = (16, 9)
    s2 = -rng.random(shape) * 200
    c, mbar, Pc, Pe = 0.02, 0.07, 0.392, 6.76
    w = 1.0 - c * s2 / Pe
    g = 1.0 / (1.0 + c * mbar * s2 * s2)
    R = [rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
         for _ in range(3)]
    got = kernels.precond_apply(s2, w, g, mbar, c, Pc, *R)
    want = ref.precond_apply(s2, w, g, mbar, c, Pc, *R)
    for a, b in zip(got, want):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-14)


def test_precond_solves_block_system():
    # outputs satisfy the 3x3 per-mode system (M - c*Jhat) x = r
    rng = np.random.default_rng(8)
    shape = (6, 4)
    s2 = -rng.random(shape) * 100
    c, mbar, Pc, Pe = 0.05, 0.05, 0.392, 6.76
    w = 1.0 - c * s2 / Pe
    g = 1.0 / (1.0 + c * mbar * s2 * s2)
    Rh = rng.standard_normal(shape) + 0j
    Rp = rng.standard_normal(shape) + 0j
    Rc = rng.standard_normal(shape) + 0j
    Xh, Xp, Xc = kernels.precond_apply(s2, w, g, mbar, c, Pc, Rh, Rp, Rc)
    # rows of the frozen-coefficient operator
    row_h = Xh - c * (mbar * s2 * Xp + Pc * Xc)
    row_p = -c * (s2 * Xh + Xp)
    row_c = Xc - c * (s2 / Pe) * Xc
    np.testing.assert_allclose(row_h, Rh, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(row_p, Rp, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(row_c, Rc, rtol=1e-12, atol=1e-12)
