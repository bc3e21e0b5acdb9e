"""Pure-numpy reference implementation of the pointwise hot kernels.

The compiled extension in ``_speedups.pyx`` provides the same functions
with the arithmetic fused into single passes over the arrays.  Keep the
two implementations in lockstep; ``tests/test_kernels.py`` asserts
agreement to roundoff.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def film_flux(h: np.ndarray, px: np.ndarray, py: np.ndarray):
    """Pressure-driven volume flux q = h * ubar = -(h^3/12) grad p."""
    mob = h * h * h / 12.0
    return -mob * px, -mob * py


def thickness_rhs(divq: np.ndarray, c: np.ndarray, J: np.ndarray, Pc: float):
    """dh/dt = -div q - J + Pc (c - 1)."""
    return -divq - J + Pc * (c - 1.0)


def solute_rhs(
    h: np.ndarray,
    s: np.ndarray,
    sx: np.ndarray,
    sy: np.ndarray,
    px: np.ndarray,
    py: np.ndarray,
    div_hgrads: np.ndarray,
    c: np.ndarray,
    J: np.ndarray,
    Pc: float,
    Pe: float,
):
    """Transport equation for a solute s (osmolarity or fluorescein),
    already divided through by h:

        ds/dt = -ubar sx - vbar sy + div(h grad s)/(h Pe) + J s/h
                - Pc (c-1) s/h

    with ubar = -(h^2/12) px, so the advection contribution enters with
    a plus sign below.
    """
    adv = (h * h / 12.0) * (px * sx + py * sy)
    return adv + div_hgrads / (h * Pe) + (J * s - Pc * (c - 1.0) * s) / h


def precond_apply(
    s2: np.ndarray,
    w: np.ndarray,
    g: np.ndarray,
    mbar: float,
    c: float,
    Pc: float,
    Rh: np.ndarray,
    Rp: np.ndarray,
    Rc: np.ndarray,
):
    """Solve the per-mode 3x3 block system of the frozen-coefficient
    preconditioner (see model.SpotPreconditioner) in spectral space.

    s2 is the Laplacian symbol (<= 0), w = 1 - c*s2/Pe_c and
    g = 1/(1 + c*mbar*s2^2) are precomputed real arrays.
    """
    xc = Rc / w
    rh = Rh + (c * Pc) * xc
    xh = g * (rh - (mbar * s2) * Rp)
    xp = -g * (s2 * rh + Rp / c)
    return xh, xp, xc
