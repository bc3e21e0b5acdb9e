"""Nondimensional two-dimensional tear-film model.

State fields on the periodic grid:

* ``h`` film thickness (units of the initial thickness d),
* ``p`` pressure, slaved to the film curvature by ``p = -lap(h)``,
* ``c`` osmolarity (units of the isotonic value),
* ``f`` fluorescein concentration (units of the critical value).

The film drains under the capillary pressure gradient with depth-averaged
velocity ``ubar = -(h^2/12) grad p`` and thins at the prescribed
evaporation rate ``J(x, y)``, a baseline plus Gaussian peaks.  Osmosis
supplies water at rate ``Pc (c - 1)``.  Solutes advect with the film,
diffuse, and are concentrated by evaporation.

All evaluation functions are pure; they take explicit field arrays and
return new arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

from . import kernels
from .spectral import PeriodicGrid, integrate_domain

__all__ = [
    "ModelParams",
    "EvaporationPeak",
    "FieldState",
    "eval_J",
    "velocities",
    "residual",
    "residual_f",
    "mechanism_terms",
    "fl_intensity",
    "total_solute",
    "dimensionalize",
    "uniform_state",
]

# Minimum admissible thickness inside solver iterations.  Well below the
# breakup threshold of ~0.222, so a valid trajectory never reaches it;
# transient Newton iterates that do are rejected via non-finite residuals.
H_FLOOR = 0.02


@dataclass(frozen=True)
class ModelParams:
    """Nondimensional model constants and the dimensional scales used
    only for unit conversion.

    Defaults are the typical parameter values for the human tear film:
    osmotic permeability ``Pc = 0.392``, Peclet numbers ``Pe_c = 6.76``
    and ``Pe_f = 27.7``, Napierian extinction parameter ``phi = 0.417``;
    thickness scale 4.5 um, length scale 0.54 mm, peak thinning rate
    10 um/min.
    """

    Pc: float = 0.392
    Pe_c: float = 6.76
    Pe_f: float = 27.7
    phi: float = 0.417
    f0: float = 1.0
    I0: float = 1.0
    d_um: float = 4.5
    ell_mm: float = 0.54
    v_max_um_min: float = 10.0

    def __post_init__(self):
        for name in ("Pc", "Pe_c", "Pe_f", "phi", "f0", "I0",
                     "d_um", "ell_mm", "v_max_um_min"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def time_scale_s(self) -> float:
        """Seconds per nondimensional time unit, d / v_max."""
        return self.d_um / self.v_max_um_min * 60.0

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)

    def rescaled_vmax(self, v_max_um_min: float) -> "ModelParams":
        """Parameters for a different peak thinning rate, keeping the
        underlying physical constants fixed.

        The velocity scale enters the nondimensional groups through
        Pc ~ 1/v_max, the length scale l ~ v_max^(-1/4), and the Peclet
        numbers ~ sqrt(v_max); phi and the thickness scale are
        unaffected.  Use this when interpreting a baseline ratio v_b as
        "same physical background, stronger peak": e.g. v_b = 0.05 with
        a fixed 1 um/min background means doubling v_max, and the other
        groups must follow.
        """
        ratio = v_max_um_min / self.v_max_um_min
        return replace(
            self,
            Pc=self.Pc / ratio,
            Pe_c=self.Pe_c * ratio**0.5,
            Pe_f=self.Pe_f * ratio**0.5,
            ell_mm=self.ell_mm * ratio**-0.25,
            v_max_um_min=v_max_um_min,
        )


@dataclass(frozen=True)
class EvaporationPeak:
    """One Gaussian peak of the evaporation map: height ``a`` (units of
    the peak thinning rate), center and characteristic widths in
    nondimensional length."""

    a: float
    center: tuple[float, float] = (0.0, 0.0)
    widths: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if self.widths[0] <= 0 or self.widths[1] <= 0:
            raise ValueError("peak widths must be positive")
        for coord in self.center:
            if not (-np.pi <= coord <= np.pi):
                raise ValueError("peak center must lie inside (-pi, pi]^2")

    @property
    def circular(self) -> bool:
        return self.widths[0] == self.widths[1]


@dataclass
class FieldState:
    """Discretized fields at one instant.  ``f`` is optional because the
    fluorescein stage is solved separately from (h, p, c)."""

    h: np.ndarray
    p: np.ndarray
    c: np.ndarray
    f: np.ndarray | None = None
    t: float = 0.0

    def copy(self) -> "FieldState":
        return FieldState(
            h=self.h.copy(),
            p=self.p.copy(),
            c=self.c.copy(),
            f=None if self.f is None else self.f.copy(),
            t=self.t,
        )


def uniform_state(grid: PeriodicGrid, params: ModelParams) -> FieldState:
    """Post-blink initial condition: all fields uniform, p = 0."""
    one = np.ones(grid.shape)
    return FieldState(h=one.copy(), p=np.zeros(grid.shape), c=one.copy(),
                      f=params.f0 * one, t=0.0)


def eval_J(
    peaks: list[EvaporationPeak],
    v_b: float,
    grid: PeriodicGrid,
    periodic_images: bool = False,
) -> np.ndarray:
    """Evaporation map: baseline v_b plus Gaussian peaks.

    Tails are not periodized by default; for the widths used here they
    decay below 1e-2 of the peak amplitude at the domain edge.  With
    ``periodic_images`` each peak is summed over its +-1 period images.
    """
    if v_b <= 0:
        raise ValueError("v_b must be positive")
    X, Y = grid.meshgrid()
    J = np.full(grid.shape, float(v_b))
    shifts = [(0.0, 0.0)]
    if periodic_images:
        shifts = [(2 * np.pi * i, 2 * np.pi * j)
                  for i in (-1, 0, 1) for j in (-1, 0, 1)]
    for pk in peaks:
        if pk.a <= v_b:
            raise ValueError(f"peak height {pk.a} must exceed baseline {v_b}")
        xw, yw = pk.widths
        for sx, sy in shifts:
            arg = ((X - pk.center[0] - sx) / xw) ** 2 + (
                (Y - pk.center[1] - sy) / yw
            ) ** 2
            J += (pk.a - v_b) * np.exp(-arg / 2.0)
    return J


def velocities(
    h: np.ndarray, p: np.ndarray, grid: PeriodicGrid
) -> tuple[np.ndarray, np.ndarray]:
    """Depth-averaged velocities (ubar, vbar) = -(h^2/12) grad p."""
    P = sfft.rfft2(p)
    px = sfft.irfft2(grid.ikx * P, s=grid.shape)
    py = sfft.irfft2(grid.iky * P, s=grid.shape)
    mob = h * h / 12.0
    return -mob * px, -mob * py


def _gradients(a: np.ndarray, grid: PeriodicGrid):
    A = sfft.rfft2(a)
    ax = sfft.irfft2(grid.ikx * A, s=grid.shape)
    ay = sfft.irfft2(grid.iky * A, s=grid.shape)
    return ax, ay


def _divergence(ax: np.ndarray, ay: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    F = grid.ikx * sfft.rfft2(ax)
    F += grid.iky * sfft.rfft2(ay)
    return sfft.irfft2(F, s=grid.shape)


def residual_packed(
    fields: np.ndarray,
    J: np.ndarray,
    params: ModelParams,
    grid: PeriodicGrid,
    dealias_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Semi-discrete system for the stacked (h, p, c) fields, shape
    (3, nx, ny).

    Row 0 and row 2 are the time-derivative targets of h and c; row 1
    is the algebraic defect p + lap(h) that the DAE solver drives to
    zero.  The solute equation has been divided through by h so the
    mass structure is a constant 0/1 diagonal; this is valid because
    integration halts well before h can reach zero.

    Transforms are batched (four FFT calls per evaluation); this is the
    hot path of the whole solver.

    With a 2/3-rule ``dealias_mask``, the fields entering the nonlinear
    products and the differential residual rows are spectrally
    truncated; the algebraic row stays untruncated so the constraint is
    exact on the full representation.  Plain collocation (no mask) is
    the default.
    """
    h, p, c = fields
    if h.min() < H_FLOOR:
        return np.full((3,) + grid.shape, np.nan)
    H, P, C = A = sfft.rfft2(fields, axes=(-2, -1))
    lap_h = sfft.irfft2(grid.k2 * H, s=grid.shape)
    if dealias_mask is not None:
        A *= dealias_mask
        h, _, c = sfft.irfft2(A, s=grid.shape, axes=(-2, -1))
    spec = np.empty((4,) + H.shape, dtype=complex)
    np.multiply(grid.ikx, P, out=spec[0])
    np.multiply(grid.iky, P, out=spec[1])
    np.multiply(grid.ikx, C, out=spec[2])
    np.multiply(grid.iky, C, out=spec[3])
    px, py, cx, cy = sfft.irfft2(spec, s=grid.shape, axes=(-2, -1))

    prods = np.empty((4,) + grid.shape)
    prods[0], prods[1] = kernels.film_flux(h, px, py)
    np.multiply(h, cx, out=prods[2])
    np.multiply(h, cy, out=prods[3])
    Q = sfft.rfft2(prods, axes=(-2, -1))
    div_spec = np.empty((2,) + H.shape, dtype=complex)
    np.multiply(grid.ikx, Q[0], out=div_spec[0])
    div_spec[0] += grid.iky * Q[1]
    np.multiply(grid.ikx, Q[2], out=div_spec[1])
    div_spec[1] += grid.iky * Q[3]
    if dealias_mask is not None:
        div_spec *= dealias_mask
    divq, div_hgradc = sfft.irfft2(div_spec, s=grid.shape, axes=(-2, -1))

    out = np.empty((3,) + grid.shape)
    out[0] = kernels.thickness_rhs(divq, c, J, params.Pc)
    np.add(p, lap_h, out=out[1])
    out[2] = kernels.solute_rhs(h, c, cx, cy, px, py, div_hgradc, c, J,
                                params.Pc, params.Pe_c)
    if dealias_mask is not None:
        R = sfft.rfft2(out[::2], axes=(-2, -1))
        R *= dealias_mask
        out[::2] = sfft.irfft2(R, s=grid.shape, axes=(-2, -1))
    return out


def residual(
    h: np.ndarray,
    p: np.ndarray,
    c: np.ndarray,
    J: np.ndarray,
    params: ModelParams,
    grid: PeriodicGrid,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Field-argument wrapper around :func:`residual_packed`; returns
    (r_h, r_p, r_c)."""
    out = residual_packed(np.stack([h, p, c]), J, params, grid)
    return out[0], out[1], out[2]


def residual_f(
    h: np.ndarray,
    p: np.ndarray,
    f: np.ndarray,
    c: np.ndarray,
    J: np.ndarray,
    params: ModelParams,
    grid: PeriodicGrid,
) -> np.ndarray:
    """Time-derivative target for the fluorescein field given the
    already-computed (h, p, c) dynamics."""
    if h.min() < H_FLOOR:
        return np.full(grid.shape, np.nan)
    P, F = sfft.rfft2(np.stack([p, f]), axes=(-2, -1))
    spec = np.empty((4,) + P.shape, dtype=complex)
    np.multiply(grid.ikx, P, out=spec[0])
    np.multiply(grid.iky, P, out=spec[1])
    np.multiply(grid.ikx, F, out=spec[2])
    np.multiply(grid.iky, F, out=spec[3])
    px, py, fx, fy = sfft.irfft2(spec, s=grid.shape, axes=(-2, -1))
    HF = sfft.rfft2(np.stack([h * fx, h * fy]), axes=(-2, -1))
    div_hgradf = sfft.irfft2(
        grid.ikx * HF[0] + grid.iky * HF[1], s=grid.shape
    )
    return kernels.solute_rhs(h, f, fx, fy, px, py, div_hgradf, c, J,
                              params.Pc, params.Pe_f)


def mechanism_terms(
    h: np.ndarray,
    p: np.ndarray,
    c: np.ndarray,
    J: np.ndarray,
    params: ModelParams,
    grid: PeriodicGrid,
) -> dict[str, np.ndarray]:
    """Decompose the osmolarity equation into its transport mechanisms.

    Returns advection, diffusion, evaporation and osmosis fields with
    the sign convention  dc/dt = -advection + diffusion + evaporation
    - osmosis.
    """
    ubar, vbar = velocities(h, p, grid)
    cx, cy = _gradients(c, grid)
    advection = ubar * cx + vbar * cy
    diffusion = _divergence(h * cx, h * cy, grid) / (h * params.Pe_c)
    evaporation = J * c / h
    osmosis = params.Pc * (c - 1.0) * c / h
    return {
        "advection": advection,
        "diffusion": diffusion,
        "evaporation": evaporation,
        "osmosis": osmosis,
    }


def fl_intensity(
    h: np.ndarray, f: np.ndarray, params: ModelParams
) -> np.ndarray:
    """Fluorescence intensity I = I0 (1 - exp(-phi f h)) / (1 + f^2)."""
    return params.I0 * (1.0 - np.exp(-params.phi * f * h)) / (1.0 + f * f)


def total_solute(h: np.ndarray, s: np.ndarray, grid: PeriodicGrid) -> float:
    """Integral of h*s over the domain; conserved along exact
    trajectories of the transport equations."""
    return integrate_domain(h * s, grid)


_DIM_UNITS = {
    "thickness": "um",
    "time": "s",
    "rate": "um/min",
    "length": "mm",
}


def dimensionalize(value, kind: str, params: ModelParams):
    """Convert a nondimensional value to physical units.

    kind: 'thickness' -> um, 'time' -> s, 'rate' -> um/min,
    'length' -> mm.  Returns (value, unit).
    """
    value = np.asarray(value, dtype=float)
    if kind == "thickness":
        out = value * params.d_um
    elif kind == "time":
        out = value * params.time_scale_s
    elif kind == "rate":
        out = value * params.v_max_um_min
    elif kind == "length":
        out = value * params.ell_mm
    else:
        raise ValueError(f"unknown kind {kind!r}; expected one of {sorted(_DIM_UNITS)}")
    if out.ndim == 0:
        out = float(out)
    return out, _DIM_UNITS[kind]
