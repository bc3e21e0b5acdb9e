"""Variable-order stiff time stepper for semi-explicit index-1 DAEs.

Integrates  M y' = G(t, y)  where M = diag(mask) with 0/1 entries:
differential rows carry the time-derivative target, algebraic rows carry
a defect that is driven to zero by the Newton iteration at every step.

The method is the quasi-constant-step numerical-differentiation-formula
(NDF) family of orders 1-5 with Shampine's accuracy-optimal kappa
coefficients; plain BDF is obtained with ``kappa = 0``.  The step and
order adaptation follows the standard backward-difference bookkeeping:
the solution history is kept as a difference array D that is rescaled
whenever the step size changes.  Local error is controlled on the
differential variables only.

Two Newton linear-solver strategies are provided:

* :class:`DenseNewton` - finite-difference dense Jacobian with LU
  factorization, reused across steps until Newton fails (the classic
  quasi-Newton scheme).  Suitable for the 1D solvers and the reduced
  POD system.
* :class:`KrylovNewton` - Jacobian-free Newton-Krylov: preconditioned
  GMRES with finite-difference directional derivatives.  The caller
  supplies a preconditioner factory; for the 2D spectral system the
  frozen-coefficient operator is block-diagonal in Fourier space.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, gmres

EPS = np.finfo(float).eps
MAX_ORDER = 5
NEWTON_MAXITER = 4
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0

# NDF relaxation coefficients (zero recovers BDF).
KAPPA = np.array([0.0, -0.1850, -1.0 / 9.0, -0.0823, -0.0415, 0.0])


def _rms(x: np.ndarray) -> float:
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x) / x.size**0.5)


def compute_R(order: int, factor: float) -> np.ndarray:
    """Pascal-like matrix that rescales the difference array when the
    step size is multiplied by ``factor``."""
    I = np.arange(1, order + 1)[:, None]
    J = np.arange(1, order + 1)
    M = np.zeros((order + 1, order + 1))
    M[1:, 1:] = (I - 1 - factor * J) / I
    M[0] = 1
    return np.cumprod(M, axis=0)


def change_D(D: np.ndarray, order: int, factor: float) -> None:
    """Rescale the difference array in place for a step-size change."""
    R = compute_R(order, factor)
    U = compute_R(order, 1)
    D[: order + 1] = (R @ U).T @ D[: order + 1]


def _newton_iterate(fun, t, y_predict, c, psi, mass, scale, tol, solve_linear):
    """Damped-free simplified Newton iteration for the step equation

        M (d + psi) = c G(t, y_predict + d).

    ``solve_linear(rhs, t, y, c, G)`` returns an approximate solution of
    (M - c dG/dy) dy = rhs, or None on linear-solver failure.
    """
    d = np.zeros_like(y_predict)
    y = y_predict.copy()
    dy_norm_old = None
    converged = False
    n_iter = 0
    # Corrections this far below tol are at the linear-solver noise
    # floor; apply and accept them regardless of the contraction rate.
    small = 0.1 * tol
    for k in range(NEWTON_MAXITER):
        n_iter = k + 1
        G = fun(t, y)
        if not np.all(np.isfinite(G)):
            break
        rhs = c * G - mass * (d + psi)
        dy = solve_linear(rhs, t, y, c, G)
        if dy is None or not np.all(np.isfinite(dy)):
            break
        dy_norm = _rms(dy / scale)
        rate = None if dy_norm_old is None else dy_norm / dy_norm_old
        if dy_norm >= small and rate is not None and (
            rate >= 1 or rate ** (NEWTON_MAXITER - k) / (1 - rate) * dy_norm > tol
        ):
            break
        y = y + dy
        d = d + dy
        if (
            dy_norm < small
            or (rate is not None and rate / (1 - rate) * dy_norm < tol)
        ):
            converged = True
            break
        dy_norm_old = dy_norm
    return converged, n_iter, y, d


class DenseNewton:
    """Finite-difference dense Jacobian with reusable LU factorization."""

    def __init__(self, n: int, fd_floor: float = 1e-3):
        self.n = n
        self.fd_floor = fd_floor
        self.J: np.ndarray | None = None
        self._lu = None
        self._lu_c: float | None = None
        self.jac_fresh = False
        self.njev = 0

    def _build_jac(self, fun, t, y) -> None:
        n = self.n
        G0 = fun(t, y)
        J = np.empty((n, n))
        step = EPS**0.5 * (np.abs(y) + self.fd_floor)
        for j in range(n):
            yj = y[j]
            y[j] = yj + step[j]
            J[:, j] = (fun(t, y) - G0) / step[j]
            y[j] = yj
        self.J = J
        self.njev += 1

    def solve(self, fun, t, y_predict, c, psi, mass, scale, tol):
        while True:
            if self.J is None:
                self._build_jac(fun, t, y_predict.copy())
                self.jac_fresh = True
                self._lu = None
            if self._lu is None or self._lu_c != c:
                A = -c * self.J
                A[np.diag_indices(self.n)] += mass
                self._lu = lu_factor(A)
                self._lu_c = c

            def solve_linear(rhs, *_):
                return lu_solve(self._lu, rhs)

            converged, n_iter, y, d = _newton_iterate(
                fun, t, y_predict, c, psi, mass, scale, tol, solve_linear
            )
            if converged or self.jac_fresh:
                return converged, n_iter, y, d
            self.J = None  # retry once with a Jacobian at this predictor

    def on_step_accepted(self) -> None:
        self.jac_fresh = False


class KrylovNewton:
    """Jacobian-free Newton-Krylov with user-supplied preconditioning.

    ``precond_factory(c, y)`` must return a callable applying an
    approximate inverse of (M - c dG/dy) to a vector.
    """

    def __init__(self, n, mass, precond_factory, lin_rtol=1e-4, restart=60):
        self.n = n
        self.mass = mass
        self.precond_factory = precond_factory
        self.lin_rtol = lin_rtol
        self.restart = restart
        self.nlinsolve = 0

    def solve(self, fun, t, y_predict, c, psi, mass, scale, tol):
        apply_P = self.precond_factory(c, y_predict)
        M_op = LinearOperator((self.n, self.n), matvec=apply_P)
        # Absolute target for the preconditioned residual: corrections
        # below ~0.1*tol in the scaled rms norm are Newton noise, so
        # there is no point iterating GMRES past that level (the
        # finite-difference matvec noise floor also sits there).
        lin_atol = 0.02 * tol * self.n**0.5 * float(np.median(scale))

        def solve_linear(rhs, t_cur, y_cur, c_cur, G_cur):
            y_norm = float(np.linalg.norm(y_cur))

            def matvec(v):
                v_norm = float(np.linalg.norm(v))
                if v_norm == 0.0:
                    return np.zeros_like(v)
                eps = EPS**0.5 * (1.0 + y_norm) ** 0.5 / v_norm
                return self.mass * v - (c_cur / eps) * (
                    fun(t_cur, y_cur + eps * v) - G_cur
                )

            A_op = LinearOperator((self.n, self.n), matvec=matvec)
            self.nlinsolve += 1
            x, info = gmres(
                A_op,
                rhs,
                M=M_op,
                rtol=self.lin_rtol,
                atol=lin_atol,
                restart=self.restart,
                maxiter=1,
            )
            # A stagnated solve (info > 0) still returns the best
            # Krylov iterate; let the Newton rate test judge it.
            return x

        return _newton_iterate(
            fun, t, y_predict, c, psi, mass, scale, tol, solve_linear
        )

    def on_step_accepted(self) -> None:
        pass


class NdfSolver:
    """Adaptive-order, quasi-constant-step NDF integrator.

    Parameters
    ----------
    fun : callable(t, y) -> array
        Right-hand side / algebraic defect, per the mass mask.
    mass : array of 0/1
        Diagonal of the (constant) mass matrix.
    newton : DenseNewton | KrylovNewton
    ydot0 : array, optional
        Consistent initial derivative.  Differential rows default to
        fun(t0, y0); algebraic rows default to zero, which only weakens
        the first-step predictor.
    """

    def __init__(
        self,
        fun,
        t0: float,
        y0: np.ndarray,
        t_bound: float,
        mass: np.ndarray,
        newton,
        rtol: float = 1e-6,
        atol: float = 1e-8,
        max_order: int = MAX_ORDER,
        first_step: float = 1e-6,
        max_step: float = np.inf,
        ydot0: np.ndarray | None = None,
        use_bdf: bool = False,
        dense_sel: np.ndarray | slice | None = None,
    ):
        if t_bound <= t0:
            raise ValueError("t_bound must exceed t0")
        if rtol <= 0 or atol <= 0:
            raise ValueError("rtol and atol must be positive")
        if not 1 <= max_order <= MAX_ORDER:
            raise ValueError(f"max_order must be in 1..{MAX_ORDER}")
        self.nfev = 0

        def counted(t, y, _fun=fun):
            self.nfev += 1
            return np.asarray(_fun(t, y), dtype=float)

        self.fun = counted
        self.t = float(t0)
        self.y = np.asarray(y0, dtype=float).copy()
        self.n = self.y.size
        self.t_bound = float(t_bound)
        self.mass = np.asarray(mass, dtype=float)
        self.diff = self.mass > 0.5
        if self.mass.shape != self.y.shape:
            raise ValueError("mass mask and state must have equal length")
        self.newton = newton
        self.rtol = rtol
        self.atol = atol
        self.max_order = max_order
        self.max_step = max_step
        self.newton_tol = max(10 * EPS / rtol, min(0.03, rtol**0.5))
        self.status = "running"
        self.message: str | None = None
        self.nsteps = 0
        self.nrejected = 0

        kappa = np.zeros(MAX_ORDER + 1) if use_bdf else KAPPA
        self.gamma = np.hstack((0, np.cumsum(1 / np.arange(1, MAX_ORDER + 1))))
        self.alpha = (1 - kappa) * self.gamma
        self.error_const = kappa * self.gamma + 1 / np.arange(1, MAX_ORDER + 2)

        if ydot0 is None:
            ydot0 = np.zeros_like(self.y)
            ydot0[self.diff] = self.fun(self.t, self.y)[self.diff]
        self.h_abs = min(first_step, max_step, 0.5 * (t_bound - t0))
        self.D = np.zeros((MAX_ORDER + 3, self.n))
        self.D[0] = self.y
        self.D[1] = np.asarray(ydot0, dtype=float) * self.h_abs
        self.order = 1
        self.n_equal_steps = 0
        self.dense_sel = np.arange(self.n) if dense_sel is None else dense_sel
        self.last_segment: BdfSegment | None = None

    # -- single adaptive step -------------------------------------------

    def step(self) -> str | None:
        """Advance one accepted step.  Returns None on success, or an
        error message (status becomes 'failed')."""
        if self.status == "finished":
            return "already finished"
        t = self.t
        D = self.D
        min_step = 10 * np.abs(np.nextafter(t, np.inf) - t)
        if self.h_abs > self.max_step:
            h_abs = self.max_step
            change_D(D, self.order, h_abs / self.h_abs)
            self.n_equal_steps = 0
        elif self.h_abs < min_step:
            h_abs = min_step
            change_D(D, self.order, h_abs / self.h_abs)
            self.n_equal_steps = 0
        else:
            h_abs = self.h_abs

        order = self.order
        alpha, gamma, error_const = self.alpha, self.gamma, self.error_const
        step_accepted = False
        while not step_accepted:
            if h_abs < min_step:
                self.status = "failed"
                self.message = "step size underflow"
                return self.message
            t_new = t + h_abs
            if t_new > self.t_bound:
                t_new = self.t_bound
                change_D(D, order, np.abs(t_new - t) / h_abs)
                self.n_equal_steps = 0
            h = t_new - t
            h_abs = np.abs(h)

            y_predict = D[: order + 1].sum(axis=0)
            scale = self.atol + self.rtol * np.abs(y_predict)
            psi = (gamma[1 : order + 1] @ D[1 : order + 1]) / alpha[order]
            c = h / alpha[order]
            converged, n_iter, y_new, d = self.newton.solve(
                self.fun, t_new, y_predict, c, psi, self.mass, scale,
                self.newton_tol,
            )
            if not converged:
                factor = 0.5
                h_abs *= factor
                change_D(D, order, factor)
                self.n_equal_steps = 0
                self.nrejected += 1
                continue

            safety = 0.9 * (2 * NEWTON_MAXITER + 1) / (2 * NEWTON_MAXITER + n_iter)
            scale = self.atol + self.rtol * np.abs(y_new)
            error = error_const[order] * d
            error_norm = _rms((error / scale)[self.diff])
            if error_norm > 1:
                factor = max(MIN_FACTOR, safety * error_norm ** (-1 / (order + 1)))
                h_abs *= factor
                change_D(D, order, factor)
                self.n_equal_steps = 0
                self.nrejected += 1
                continue
            step_accepted = True

        self.n_equal_steps += 1
        self.nsteps += 1
        self.t = t_new
        self.y = y_new
        self.h_abs = h_abs
        self.newton.on_step_accepted()

        D[order + 2] = d - D[order + 1]
        D[order + 1] = d
        for i in reversed(range(order + 1)):
            D[i] += D[i + 1]
        self.last_segment = BdfSegment(
            t, t_new, h_abs, order, D[: order + 1, self.dense_sel].copy()
        )

        if self.t >= self.t_bound:
            self.status = "finished"
        if self.n_equal_steps < order + 1:
            return None

        # Order selection from the error estimates of neighboring orders.
        if order > 1:
            error_m_norm = _rms(
                ((error_const[order - 1] * D[order]) / scale)[self.diff]
            )
        else:
            error_m_norm = np.inf
        if order < self.max_order:
            error_p_norm = _rms(
                ((error_const[order + 1] * D[order + 2]) / scale)[self.diff]
            )
        else:
            error_p_norm = np.inf
        error_norms = np.array([error_m_norm, error_norm, error_p_norm])
        with np.errstate(divide="ignore"):
            factors = error_norms ** (-1 / np.arange(order, order + 3))
        delta_order = int(np.argmax(factors)) - 1
        self.order = order = order + delta_order
        factor = min(MAX_FACTOR, safety * np.max(factors))
        self.h_abs *= factor
        change_D(D, order, factor)
        self.n_equal_steps = 0
        return None

class BdfSegment:
    """Dense output of one accepted step: the interpolating polynomial
    of the backward-difference history, in Newton product form.

    Built purely from solution values (never from rhs evaluations), so
    its accuracy on stiff problems matches the integrator's own local
    error instead of amplifying state noise by the stiff eigenvalues.
    """

    __slots__ = ("t_old", "t_new", "order", "t_shift", "denom", "D")

    def __init__(self, t_old: float, t_new: float, h: float, order: int,
                 D: np.ndarray):
        self.t_old = t_old
        self.t_new = t_new
        self.order = order
        self.t_shift = t_new - h * np.arange(order)
        self.denom = h * (1 + np.arange(order))
        self.D = D  # rows 0..order of the difference array, shape (order+1, nsel)

    def __call__(self, t: float) -> np.ndarray:
        if self.order == 0:
            return self.D[0].copy()
        x = (t - self.t_shift) / self.denom
        p = np.cumprod(x)
        return self.D[0] + p @ self.D[1:]


class PolyChain:
    """Piecewise-polynomial dense output over accepted steps, for a
    selected subset of state components."""

    def __init__(self, t0: float, y0_sel: np.ndarray):
        self.t0 = float(t0)
        self.y0 = np.asarray(y0_sel, dtype=float).copy()
        self.segments: list[BdfSegment] = []
        self.ends: list[float] = []
        self.knots: list[float] = [float(t0)]

    def append(self, seg: BdfSegment) -> None:
        self.segments.append(seg)
        self.ends.append(seg.t_new)
        self.knots.append(seg.t_new)

    def truncate_at(self, t_star: float) -> None:
        """Clamp the chain to end at t_star (an event time inside the
        last accepted step); later segments are dropped."""
        if t_star <= self.t0:
            raise ValueError("truncation before the first accepted step")
        keep = int(np.searchsorted(np.asarray(self.ends), t_star, side="left"))
        self.segments = self.segments[: keep + 1]
        self.ends = [s.t_new for s in self.segments]
        self.ends[-1] = float(t_star)
        self.knots = [self.t0] + self.ends

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.knots)

    @property
    def t_min(self) -> float:
        return self.t0

    @property
    def t_max(self) -> float:
        return self.ends[-1] if self.ends else self.t0

    def __len__(self) -> int:
        return len(self.knots)

    def __call__(self, t: float) -> np.ndarray:
        if not self.segments:
            return self.y0.copy()
        t = min(max(t, self.t0), self.ends[-1])
        i = int(np.searchsorted(np.asarray(self.ends), t, side="left"))
        i = min(i, len(self.segments) - 1)
        return self.segments[i](t)
