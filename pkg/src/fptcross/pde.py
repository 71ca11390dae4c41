"""Finite-difference solvers and residual checkers.

``solve_fk_cauchy``
    Backward Crank-Nicolson solve of
    ``-v_t + f''(t) x v = 1/2 v_xx + (1/x - x/(s-t)) v_x``, ``v(s, .) = 1``.
    ``v(0, a)`` is the Bessel-bridge expectation ``E exp(-int f'' X)``.
``solve_killed_heat``
    Forward Crank-Nicolson solve for the density ``q`` of ``y = f(t) - B_t``
    killed at ``y = 0``; the first-passage density is the flux ``q_y(t, 0)/2``.
``residual_w``, ``residual_u``, ``ratio_identity_check``
    Centred-difference residuals of the linear-potential equations on a
    supplied field.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.special import erf

from .boundary import Boundary
from .errors import DeltaApproximationError, GridTooCoarse, NonConvergence
from .kernels import heat_kernel
from .montecarlo import DensityCurve, girsanov_prefactor

MEANINGS = ("v_field", "w_field", "u_field", "omega_field", "kappa_field")
MIN_NX = 200
RANNACHER_STEPS = 2
_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


@dataclass
class FieldGrid:
    t_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray
    meaning: str

    def __post_init__(self):
        if self.meaning not in MEANINGS:
            raise ValueError(f"unknown field meaning {self.meaning!r}")
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.x_grid = np.asarray(self.x_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.t_grid.size, self.x_grid.size):
            raise ValueError("field shape does not match its grids")

    @classmethod
    def from_function(cls, fn, t_grid, x_grid, meaning: str) -> "FieldGrid":
        """Tabulate ``fn(T, X)`` (broadcasting) on the product grid."""
        tt, xx = np.meshgrid(np.asarray(t_grid, float), np.asarray(x_grid, float), indexing="ij")
        return cls(t_grid, x_grid, fn(tt, xx), meaning)

    @property
    def dt(self) -> float:
        return _uniform_step(self.t_grid, "t")

    @property
    def dx(self) -> float:
        return _uniform_step(self.x_grid, "x")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "value"])
            for i, t in enumerate(self.t_grid):
                for j, x in enumerate(self.x_grid):
                    w.writerow([f"{t:.9g}", f"{x:.9g}", f"{self.values[i, j]:.9g}"])


def _uniform_step(g: np.ndarray, name: str) -> float:
    d = np.diff(g)
    if d.size == 0 or np.any(d <= 0) or np.ptp(d) > 1e-9 * d.mean():
        raise ValueError(f"{name}-grid must be uniform and increasing")
    return float(d.mean())


# ---------------------------------------------------------------------------
# tridiagonal helpers


def _theta_step(lower, diag, upper, rhs_vec, prev, theta, dt):
    """One theta-step of ``u' = A u`` with ``A`` tridiagonal (lower, diag, upper).

    ``rhs_vec`` holds extra source terms already multiplied by ``dt``.
    """
    n = diag.size
    expl = diag * prev
    expl[1:] += lower[1:] * prev[:-1]
    expl[:-1] += upper[:-1] * prev[1:]
    rhs = prev + (1.0 - theta) * dt * expl + rhs_vec
    ab = np.zeros((3, n))
    ab[0, 1:] = -theta * dt * upper[:-1]
    ab[1] = 1.0 - theta * dt * diag
    ab[2, :-1] = -theta * dt * lower[1:]
    out = solve_banded((1, 1), ab, rhs, check_finite=False)
    if not np.all(np.isfinite(out)):
        raise NonConvergence("tridiagonal solve produced non-finite values")
    return out


# ---------------------------------------------------------------------------
# Feynman-Kac Cauchy problem


def _far_field(boundary: Boundary, s: float, t: float, x_max: float) -> float:
    """``exp(-int_t^s f''(u) x_max (s-u)/(s-t) du)``: the value along the straight line to 0."""
    if s - t <= 0:
        return 1.0
    u = 0.5 * (s - t) * (_GL_X + 1.0) + t
    integrand = np.asarray(boundary.eval(u, 2)) * x_max * (s - u) / (s - t)
    return math.exp(-0.5 * (s - t) * float(_GL_W @ integrand))


def _fk_operator(x: np.ndarray, dx: float, curvature: float, remaining: float):
    """Tridiagonal generator on nodes ``x_0 = 0 .. x_{N-1}`` (``x_N`` is Dirichlet)."""
    n = x.size
    lower = np.zeros(n)
    diag = np.zeros(n)
    upper = np.zeros(n)
    # radial part 1/2 v'' + v'/x = (x^2 v')' / (2 x^2); at x = 0 it tends to 3/2 v''(0)
    upper[0] = 3.0 / dx**2
    diag[0] = -3.0 / dx**2
    xi = x[1:]
    xp = (xi + 0.5 * dx) ** 2 / (2.0 * xi**2 * dx**2)
    xm = (xi - 0.5 * dx) ** 2 / (2.0 * xi**2 * dx**2)
    pull = xi / remaining
    centred = xp - pull / (2.0 * dx) >= 0.0
    lo = xm + np.where(centred, pull / (2.0 * dx), pull / dx)
    up = xp - np.where(centred, pull / (2.0 * dx), 0.0)
    lower[1:] = lo
    upper[1:] = up
    diag[1:] = -(xp + xm) - np.where(centred, 0.0, pull / dx)
    diag -= curvature * x
    return lower, diag, upper, centred


def solve_fk_cauchy(
    boundary: Boundary,
    s: float,
    n_t: int = 2000,
    n_x: int = 2000,
    x_max: float | None = None,
) -> FieldGrid:
    """Solve the Cauchy problem backward from ``v(s, .) = 1``.

    The drift ``-x/(s-t)`` is centred where the cell Peclet condition holds and
    upwinded elsewhere; coefficients are frozen at step midpoints, so the last
    step sees ``s - t = dt/2``. The first ``RANNACHER_STEPS`` steps from the
    terminal face are split into two implicit Euler half-steps.

    Raises
    ------
    GridTooCoarse
        ``n_x < 200``, ``x_max < 5 max(a, sqrt(s))``, or the drift at ``x = a``
        already needs upwinding at ``t = 0``.
    NonConvergence
        A tridiagonal solve returned non-finite values.
    """
    a = boundary.a
    if x_max is None:
        x_max = 5.0 * max(a, math.sqrt(s))
    if int(n_x) < MIN_NX:
        raise GridTooCoarse(f"n_x={n_x} below {MIN_NX}")
    if x_max < 5.0 * max(a, math.sqrt(s)) * (1 - 1e-12):
        raise GridTooCoarse(f"x_max={x_max} below 5*max(a, sqrt(s))")
    n_t, n_x = int(n_t), int(n_x)
    if n_t < 2:
        raise GridTooCoarse("n_t must be at least 2")
    dx = x_max / n_x
    dt = s / n_t
    x = np.arange(n_x + 1) * dx
    t = np.arange(n_t + 1) * dt
    t[-1] = s
    inner = x[:-1]

    ja = min(int(round(a / dx)), n_x - 1)
    *_, centred0 = _fk_operator(inner, dx, 0.0, s)
    if ja >= 1 and not centred0[ja - 1]:
        raise GridTooCoarse("cell Peclet condition fails at x=a, t=0")

    vals = np.empty((n_t + 1, n_x + 1))
    vals[-1] = 1.0
    cur = np.ones(n_x)
    far_prev = 1.0
    for n in range(n_t - 1, -1, -1):
        t_lo, t_hi = t[n], t[n + 1]
        far_now = _far_field(boundary, s, t_lo, x_max)
        if n >= n_t - RANNACHER_STEPS:
            t_mid = t_hi - 0.5 * dt
            far_mid = _far_field(boundary, s, t_mid, x_max)
            for tm, fb in ((t_mid, far_mid), (t_lo, far_now)):
                rem = max(s - tm, 0.5 * dt)
                lo, dg, up, _ = _fk_operator(inner, dx, float(boundary.eval(tm, 2)), rem)
                src = np.zeros(n_x)
                src[-1] = 0.5 * dt * up[-1] * fb
                cur = _theta_step(lo, dg, up, src, cur, 1.0, 0.5 * dt)
        else:
            tm = 0.5 * (t_lo + t_hi)
            rem = s - tm
            lo, dg, up, _ = _fk_operator(inner, dx, float(boundary.eval(tm, 2)), rem)
            src = np.zeros(n_x)
            src[-1] = 0.5 * dt * up[-1] * (far_prev + far_now)
            cur = _theta_step(lo, dg, up, src, cur, 0.5, dt)
        vals[n, :-1] = cur
        vals[n, -1] = far_now
        far_prev = far_now
    return FieldGrid(t, x, vals, "v_field")


def value_at(field: FieldGrid, row: int, x: float) -> float:
    """Cubic interpolation of one time row at ``x``."""
    xs = field.x_grid
    j = int(np.searchsorted(xs, x))
    lo, hi = max(0, j - 4), min(xs.size, j + 4)
    return float(CubicSpline(xs[lo:hi], field.values[row, lo:hi])(x))


def density_from_v(vfield: FieldGrid, boundary: Boundary, s: float) -> float:
    """``exp(-a f'(0) - 1/2 int_0^s f'^2) h(s, a) v(0, a)``."""
    if vfield.meaning != "v_field":
        raise ValueError("density_from_v needs a v_field")
    return girsanov_prefactor(boundary, s) * value_at(vfield, 0, boundary.a)


def fk_curve(boundary: Boundary, s_grid, n_t: int = 2000, n_x: int = 2000, x_max: float | None = None) -> DensityCurve:
    """Density at each ``s`` via one backward solve per ``s``."""
    s_grid = np.asarray(s_grid, dtype=float)
    phi = [density_from_v(solve_fk_cauchy(boundary, float(s), n_t, n_x, x_max), boundary, float(s)) for s in s_grid]
    return DensityCurve(s_grid, np.array(phi), "fk_pde", boundary.digest, meta={"n_t": n_t, "n_x": n_x})


# ---------------------------------------------------------------------------
# killed heat equation in boundary-fixed coordinates


def solve_killed_heat(
    boundary: Boundary,
    t_max: float,
    n_t: int = 2000,
    n_y: int = 2000,
    y_max: float | None = None,
) -> DensityCurve:
    """First-passage density from the absorbed Fokker-Planck equation.

    With ``y = f(t) - x`` the density solves ``q_t = 1/2 q_yy - f'(t) q_y``,
    ``q(t, 0) = 0``. The point mass at ``y = a`` is replaced at ``t = dt`` by
    its exact one-step profile ``k(dt, y - f(dt)) - k(dt, y + f(dt))``. The
    flux ``q_y(t, 0)/2`` uses a one-sided second-order difference.

    ``meta["survival"]`` holds ``int q dy`` on the returned time grid and
    ``meta["lost_initial"]`` the mass absorbed before ``dt``.
    """
    a = boundary.a
    n_t, n_y = int(n_t), int(n_y)
    if y_max is None:
        y_max = float(boundary.eval(t_max, 0)) + 8.0 * math.sqrt(t_max)
    if n_y < MIN_NX or n_t < 2:
        raise GridTooCoarse(f"grid {n_t}x{n_y} too coarse")
    if y_max < 5.0 * max(a, math.sqrt(t_max)) * (1 - 1e-12):
        raise GridTooCoarse(f"y_max={y_max} below 5*max(a, sqrt(t_max))")
    dt = t_max / n_t
    dy = y_max / n_y
    y = np.arange(n_y + 1) * dy
    t = np.arange(n_t + 1) * dt
    t[-1] = t_max
    slopes = np.asarray(boundary.eval(t, 1), dtype=float)
    if np.max(np.abs(slopes)) * dy > 1.0:
        raise GridTooCoarse("cell Peclet condition |f'| dy <= 1 fails")

    centre = float(boundary.eval(dt, 0))
    q = heat_kernel(dt, y - centre) - heat_kernel(dt, y + centre)
    q[0] = 0.0
    q[-1] = 0.0
    mass0 = float(np.trapezoid(q, y))
    expected0 = float(erf(centre / math.sqrt(2.0 * dt)))
    if abs(mass0 - expected0) > 1e-3:
        raise DeltaApproximationError(
            f"initial mass {mass0:.6f} vs {expected0:.6f}; refine n_y or coarsen n_t"
        )

    inner = q[1:-1].copy()
    m = inner.size
    diff = 0.5 / dy**2
    phi = np.zeros(n_t + 1)
    surv = np.zeros(n_t + 1)
    surv[0] = 1.0

    def flux(v):
        return 0.5 * (4.0 * v[0] - v[1]) / (2.0 * dy)

    def op(slope):
        adv = slope / (2.0 * dy)
        return (
            np.full(m, diff + adv),
            np.full(m, -2.0 * diff),
            np.full(m, diff - adv),
        )

    phi[1] = flux(inner)
    surv[1] = mass0
    zero = np.zeros(m)
    for n in range(1, n_t):
        if n <= RANNACHER_STEPS:
            for t_end in (t[n] + 0.5 * dt, t[n + 1]):
                lo, dg, up = op(float(boundary.eval(t_end, 1)))
                inner = _theta_step(lo, dg, up, zero, inner, 1.0, 0.5 * dt)
        else:
            lo, dg, up = op(float(boundary.eval(0.5 * (t[n] + t[n + 1]), 1)))
            inner = _theta_step(lo, dg, up, zero, inner, 0.5, dt)
        phi[n + 1] = flux(inner)
        surv[n + 1] = float(np.sum(inner) * dy)
    phi = np.clip(phi, 0.0, None)
    return DensityCurve(
        t[1:],
        phi[1:],
        "heat_pde",
        boundary.digest,
        meta={
            "n_t": n_t,
            "n_y": n_y,
            "y_max": y_max,
            "survival": surv[1:],
            "lost_initial": 1.0 - expected0,
        },
    )


# ---------------------------------------------------------------------------
# residual checks on supplied fields


def _centred(field: FieldGrid):
    """Interior values and centred ``f_t, f_x, f_xx`` (one-cell margin)."""
    v = field.values
    dt, dx = field.dt, field.dx
    core = v[1:-1, 1:-1]
    ft = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2.0 * dt)
    fx = (v[1:-1, 2:] - v[1:-1, :-2]) / (2.0 * dx)
    fxx = (v[1:-1, 2:] - 2.0 * core + v[1:-1, :-2]) / dx**2
    tt, xx = np.meshgrid(field.t_grid[1:-1], field.x_grid[1:-1], indexing="ij")
    return core, ft, fx, fxx, tt, xx


def residual_w(wfield: FieldGrid, boundary: Boundary, s: float) -> float:
    """``max |-w_t + f''(t) x w - 1/2 w_xx|`` over interior nodes."""
    w, wt, _, wxx, tt, xx = _centred(wfield)
    curv = np.asarray(boundary.eval(tt, 2))
    return float(np.max(np.abs(-wt + curv * xx * w - 0.5 * wxx)))


def residual_u(ufield: FieldGrid, boundary: Boundary, s: float) -> float:
    """``max |-u_t + (f''(t) x - 1/(s-t)) u - 1/2 u_xx - u_x / x|`` over interior nodes."""
    u, ut, ux, uxx, tt, xx = _centred(ufield)
    curv = np.asarray(boundary.eval(tt, 2))
    res = -ut + (curv * xx - 1.0 / (s - tt)) * u - 0.5 * uxx - ux / xx
    return float(np.max(np.abs(res)))


def residual_v(vfield: FieldGrid, boundary: Boundary, s: float) -> float:
    """Residual of the Cauchy equation for ``v`` over interior nodes."""
    v, vt, vx, vxx, tt, xx = _centred(vfield)
    curv = np.asarray(boundary.eval(tt, 2))
    res = -vt + curv * xx * v - 0.5 * vxx - (1.0 / xx - xx / (s - tt)) * vx
    return float(np.max(np.abs(res)))


def _h_complex(tau, z):
    return z / np.sqrt(2.0 * np.pi * tau**3) * np.exp(-(z**2) / (2.0 * tau))


def _log_h_complex(tau, z):
    return np.log(z) - 0.5 * np.log(2.0 * np.pi * tau**3) - z**2 / (2.0 * tau)


def gauge_deviation(tau, x) -> float:
    """Max of ``|(1/x - x/tau) - h_x/h|``.

    ``h_x/h`` is the complex-step derivative of ``log h``, which stays finite
    where ``h`` itself underflows.
    """
    tau = np.asarray(tau, dtype=float)
    x = np.asarray(x, dtype=float)
    step = 1e-30
    ratio = np.imag(_log_h_complex(tau, x + 1j * step)) / step
    lhs = 1.0 / x - x / tau
    return float(np.max(np.abs(lhs - ratio)))


class RatioCheck(NamedTuple):
    max_residual: float
    gauge_deviation: float


def ratio_identity_check(wfield: FieldGrid, boundary: Boundary, s: float) -> RatioCheck:
    """Form ``v = w / h(s-t, x)`` and return its Cauchy-equation residual.

    Needs ``t < s`` and ``x > 0`` on every node. The gauge identity
    ``1/x - x/(s-t) = h_x/h`` is evaluated on the same nodes.
    """
    tt, xx = np.meshgrid(wfield.t_grid, wfield.x_grid, indexing="ij")
    if np.any(tt >= s) or np.any(xx <= 0):
        raise ValueError("ratio check needs t < s and x > 0 on the whole grid")
    hv = _h_complex(s - tt, xx)
    vfield = FieldGrid(wfield.t_grid, wfield.x_grid, wfield.values / hv, "v_field")
    return RatioCheck(residual_v(vfield, boundary, s), gauge_deviation(s - tt, xx))


def compatibility_ratio(wfield: FieldGrid, s: float) -> np.ndarray:
    """``w / h(s - t, x)`` on the last time row, which should tend to 1 as ``t -> s``."""
    t_last = wfield.t_grid[-1]
    if t_last >= s:
        raise ValueError("last time row must satisfy t < s")
    return wfield.values[-1] / _h_complex(s - t_last, wfield.x_grid)
