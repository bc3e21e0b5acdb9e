"""Fourier spectral collocation on uniform periodic grids.

The 2D domain is the periodic square of side 2*pi sampled at
``x_i = -pi + 2*pi*i/nx`` (and likewise in y), so the nodes cover one full
period with the point x = -pi identified with x = +pi.  Fields are real
arrays of shape ``(nx, ny)`` indexed ``field[ix, iy]``.

Derivatives are computed by wavenumber multiplication of the real FFT;
the Nyquist mode is zeroed for odd derivative orders and kept for even
orders.  All operations are pure functions of their array arguments.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

__all__ = [
    "PeriodicGrid",
    "PeriodicLine",
    "deriv_x",
    "deriv_y",
    "laplacian",
    "fourier_interpolate",
    "integrate_domain",
    "eval_at_points",
    "deriv_line",
    "integrate_line",
    "eval_line_at_points",
]


class PeriodicGrid:
    """Uniform periodic grid on the square (-pi, pi]^2.

    Parameters
    ----------
    nx, ny : int
        Number of nodes per axis.  Must be even and at least 8.
    """

    def __init__(self, nx: int, ny: int):
        for name, n in (("nx", nx), ("ny", ny)):
            if n < 8 or n % 2 != 0:
                raise ValueError(f"{name} must be even and >= 8, got {n}")
        self.nx = int(nx)
        self.ny = int(ny)
        self.x = -np.pi + 2.0 * np.pi * np.arange(self.nx) / self.nx
        self.y = -np.pi + 2.0 * np.pi * np.arange(self.ny) / self.ny
        self.dx = 2.0 * np.pi / self.nx
        self.dy = 2.0 * np.pi / self.ny

        # Wavenumbers in rfft2 layout: axis 0 full, axis 1 half spectrum.
        kx = np.fft.fftfreq(self.nx) * self.nx
        ky = np.fft.rfftfreq(self.ny) * self.ny
        self.kx = kx[:, None]
        self.ky = ky[None, :]
        kx_odd = kx.copy()
        kx_odd[self.nx // 2] = 0.0  # Nyquist dropped for odd derivatives
        ky_odd = ky.copy()
        ky_odd[-1] = 0.0
        self.ikx = 1j * kx_odd[:, None]
        self.iky = 1j * ky_odd[None, :]
        self.kx2 = -(self.kx**2)
        self.ky2 = -(self.ky**2)
        self.k2 = self.kx2 + self.ky2  # symbol of the Laplacian (<= 0)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays X, Y of shape (nx, ny)."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    def __repr__(self) -> str:
        return f"PeriodicGrid(nx={self.nx}, ny={self.ny})"


def _check_shape(field: np.ndarray, grid: PeriodicGrid) -> None:
    if field.shape != grid.shape:
        raise ValueError(f"field shape {field.shape} does not match grid {grid.shape}")


def deriv_x(field: np.ndarray, grid: PeriodicGrid, order: int = 1) -> np.ndarray:
    """Spectral derivative along x of the given order (1 or 2)."""
    _check_shape(field, grid)
    F = sfft.rfft2(field)
    if order == 1:
        F *= grid.ikx
    elif order == 2:
        F *= grid.kx2
    else:
        raise ValueError(f"order must be 1 or 2, got {order}")
    return sfft.irfft2(F, s=grid.shape)


def deriv_y(field: np.ndarray, grid: PeriodicGrid, order: int = 1) -> np.ndarray:
    """Spectral derivative along y of the given order (1 or 2)."""
    _check_shape(field, grid)
    F = sfft.rfft2(field)
    if order == 1:
        F *= grid.iky
    elif order == 2:
        F *= grid.ky2
    else:
        raise ValueError(f"order must be 1 or 2, got {order}")
    return sfft.irfft2(F, s=grid.shape)


def laplacian(field: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """d^2/dx^2 + d^2/dy^2 via a single transform pair."""
    _check_shape(field, grid)
    F = sfft.rfft2(field)
    F *= grid.k2
    return sfft.irfft2(F, s=grid.shape)


def integrate_domain(field: np.ndarray, grid: PeriodicGrid) -> float:
    """Integral over the periodic square: mean times (2*pi)^2.

    Exact for trigonometric polynomials resolvable on the grid (the
    trapezoid rule is spectrally accurate on periodic data).
    """
    _check_shape(field, grid)
    return float(field.mean() * (2.0 * np.pi) ** 2)


def _resample_modes_1d(coeffs: np.ndarray, n_out: int) -> np.ndarray:
    """Resample normalized DFT coefficients along the last axis.

    Treats the input as the coefficients of the minimal-oscillation
    trigonometric interpolant (Nyquist mode split between +-N/2) and
    returns the coefficients of that interpolant sampled on ``n_out``
    uniform nodes.  Aliasing is applied when downsampling, which makes
    the operation exactly "evaluate the interpolant at the new nodes".
    """
    n_in = coeffs.shape[-1]
    if n_out == n_in:
        return coeffs
    k_in = np.fft.fftfreq(n_in, 1.0 / n_in).astype(int)
    out = np.zeros(coeffs.shape[:-1] + (n_out,), dtype=complex)
    half = np.zeros_like(coeffs[..., 0])

    def acc(k: int, values: np.ndarray) -> None:
        out[..., k % n_out] += values

    for j, k in enumerate(k_in):
        if k == -n_in // 2:
            half = 0.5 * coeffs[..., j]
            acc(-n_in // 2, half)
            acc(n_in // 2, half)
        else:
            acc(k, coeffs[..., j])
    return out


def fourier_interpolate(
    field: np.ndarray, grid_in: PeriodicGrid, grid_out: PeriodicGrid
) -> np.ndarray:
    """Resample a field onto another periodic grid by trigonometric
    interpolation (zero padding up, aliasing down)."""
    _check_shape(field, grid_in)
    if grid_out.shape == grid_in.shape:
        return field.copy()
    coeffs = sfft.fft2(field, norm="forward")
    coeffs = _resample_modes_1d(coeffs.swapaxes(0, -1), grid_out.nx).swapaxes(0, -1)
    coeffs = _resample_modes_1d(coeffs, grid_out.ny)
    return sfft.ifft2(coeffs, norm="forward").real


def _expanded_coeffs(coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of exp(i k x) for the minimal-oscillation interpolant.

    Returns (k, a) with k = -n/2 .. n/2 ascending, the Nyquist mode
    split symmetrically, and the first-node phase (grids start at -pi,
    so a_k = F_k * (-1)^k) folded in.
    """
    n = coeffs.shape[-1]
    shifted = np.fft.fftshift(coeffs, axes=-1)  # k = -n/2 .. n/2-1
    expanded = np.concatenate([shifted, shifted[..., :1]], axis=-1)
    expanded[..., 0] = 0.5 * expanded[..., 0]
    expanded[..., -1] = 0.5 * expanded[..., -1]
    k = np.arange(-(n // 2), n // 2 + 1)
    expanded = expanded * np.where(k % 2 == 0, 1.0, -1.0)
    return k, expanded


def eval_at_points(
    field: np.ndarray, grid: PeriodicGrid, points: np.ndarray
) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``field`` at arbitrary
    (x, y) points.

    ``points`` has shape (npts, 2).  Exact (to roundoff) at grid nodes.
    """
    _check_shape(field, grid)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    coeffs = sfft.fft2(field, norm="forward")
    kx, ax = _expanded_coeffs(coeffs.T)  # transpose: expand x-axis last
    A = ax.swapaxes(0, -1)  # (nx+1, ny)
    ky, A = _expanded_coeffs(A)  # (nx+1, ny+1)
    ex = np.exp(1j * np.outer(pts[:, 0], kx))  # (npts, nx+1)
    ey = np.exp(1j * np.outer(ky, pts[:, 1]))  # (ny+1, npts)
    vals = np.einsum("pk,kl,lp->p", ex, A, ey)
    return vals.real


class PeriodicLine:
    """One-dimensional periodic grid on (-pi, pi], same conventions as
    :class:`PeriodicGrid` restricted to a single axis."""

    def __init__(self, n: int):
        if n < 8 or n % 2 != 0:
            raise ValueError(f"n must be even and >= 8, got {n}")
        self.n = int(n)
        self.x = -np.pi + 2.0 * np.pi * np.arange(self.n) / self.n
        self.dx = 2.0 * np.pi / self.n
        k = np.fft.rfftfreq(self.n) * self.n
        k_odd = k.copy()
        k_odd[-1] = 0.0
        self.ik = 1j * k_odd
        self.k2 = -(k**2)

    @property
    def size(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"PeriodicLine(n={self.n})"


def deriv_line(field: np.ndarray, line: PeriodicLine, order: int = 1) -> np.ndarray:
    """Spectral derivative on a 1D periodic grid."""
    if field.shape != (line.n,):
        raise ValueError(f"field shape {field.shape} does not match line ({line.n},)")
    F = sfft.rfft(field)
    if order == 1:
        F *= line.ik
    elif order == 2:
        F *= line.k2
    else:
        raise ValueError(f"order must be 1 or 2, got {order}")
    return sfft.irfft(F, n=line.n)


def integrate_line(field: np.ndarray, line: PeriodicLine) -> float:
    """Integral over one period: mean times 2*pi."""
    return float(field.mean() * 2.0 * np.pi)


def eval_line_at_points(
    field: np.ndarray, line: PeriodicLine, points: np.ndarray
) -> np.ndarray:
    """Evaluate the 1D trigonometric interpolant at arbitrary points."""
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    coeffs = sfft.fft(field, norm="forward")
    k, a = _expanded_coeffs(coeffs)
    vals = np.exp(1j * np.outer(pts, k)) @ a
    return vals.real


def dealias_mask(grid: PeriodicGrid) -> np.ndarray:
    """2/3-rule mask in rfft2 layout (True = keep)."""
    return (np.abs(grid.kx) <= grid.nx // 3) & (np.abs(grid.ky) <= grid.ny // 3)


def apply_mask(field: np.ndarray, grid: PeriodicGrid, mask: np.ndarray) -> np.ndarray:
    """Zero the masked-out modes of a real field."""
    F = sfft.rfft2(field)
    F *= mask
    return sfft.irfft2(F, s=grid.shape)
