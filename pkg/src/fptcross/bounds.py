"""Jensen-inequality envelope for the first-passage density and the small-gap flux bounds.

Since ``0 <= exp(-int f'' X) <= 1`` and ``exp`` is convex,

    upper(s) = h(s, a) exp(-a f'(0) - 1/2 int_0^s f'^2)
    lower(s) = upper(s) exp(-int_0^s f''(u) E[X_u] du)

where ``X`` is the Bessel bridge from ``a`` pinned at ``s``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from .boundary import Boundary
from .errors import DomainError, QuadratureFailure
from .kernels import BridgeSpec, bridge_mean
from .montecarlo import girsanov_prefactor

_MEAN_COEF = 2.0 * math.sqrt(2.0 / math.pi)


@dataclass
class BoundsEnvelope:
    s_grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def contains(self, s, phi, rel_tol: float = 0.0, abs_tol: float = 0.0) -> np.ndarray:
        """Pointwise test ``lower - band <= phi <= upper + band`` at grid times ``s``."""
        lo = np.interp(s, self.s_grid, self.lower)
        hi = np.interp(s, self.s_grid, self.upper)
        phi = np.asarray(phi, dtype=float)
        return (phi >= lo * (1.0 - rel_tol) - abs_tol) & (phi <= hi * (1.0 + rel_tol) + abs_tol)

    @property
    def log_gap(self) -> np.ndarray:
        return np.log(self.upper / self.lower)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "lower", "upper"])
        for s, lo, hi in zip(self.s_grid, self.lower, self.upper):
            w.writerow([f"{s:.9g}", f"{lo:.9g}", f"{hi:.9g}"])
        return buf.getvalue()


def _quad(fn, lo, hi, **kw) -> float:
    val, err = integrate.quad(fn, lo, hi, epsabs=0.0, epsrel=1e-10, limit=200, **kw)
    if not np.isfinite(val) or err > 1e-7 * max(abs(val), 1e-300):
        raise QuadratureFailure(f"quadrature on [{lo}, {hi}] did not converge (err={err:g})")
    return float(val)


def curvature_mean_integral(boundary: Boundary, s: float) -> float:
    """``int_0^s f''(u) E[X_u] du`` for the bridge from ``a`` pinned at ``s``."""
    spec = BridgeSpec(boundary.a, s)
    return _quad(lambda u: boundary.eval(u, 2) * bridge_mean(spec, u), 0.0, s)


def theorem_envelope(boundary: Boundary, s_grid) -> BoundsEnvelope:
    s_grid = np.atleast_1d(np.asarray(s_grid, dtype=float))
    if np.any(s_grid <= 0):
        raise DomainError("envelope times must be positive")
    upper = np.array([girsanov_prefactor(boundary, float(s)) for s in s_grid])
    if boundary.is_polynomial and boundary.has_zero_curvature():
        return BoundsEnvelope(s_grid, upper.copy(), upper)
    gap = np.array([curvature_mean_integral(boundary, float(s)) for s in s_grid])
    return BoundsEnvelope(s_grid, upper * np.exp(-gap), upper)


def corollary_flux_bounds(boundary: Boundary, s: float) -> tuple[float, float]:
    """Bounds on the small-gap limit ``phi(s, a) / a`` as ``a -> 0``.

    The lower exponent ``2 sqrt(2/pi) int_0^s f''(u) sqrt(u (s-u) / s) du`` is
    integrated with the algebraic weight ``u^(1/2) (s-u)^(1/2)``.
    """
    if s <= 0:
        raise DomainError("s must be positive")
    upper = math.exp(-0.5 * boundary.integral_df_sq(s)) / math.sqrt(2.0 * math.pi * s**3)
    if boundary.is_polynomial and boundary.has_zero_curvature():
        return upper, upper
    weighted = _quad(lambda u: boundary.eval(u, 2), 0.0, s, weight="alg", wvar=(0.5, 0.5))
    exponent = _MEAN_COEF * weighted / math.sqrt(s)
    return upper * math.exp(-exponent), upper


def fractional_integral(g: Callable[[float], float], alpha: float, x: float) -> float:
    """Riemann-Liouville integral ``(1/Gamma(alpha)) int_0^x (x-y)^(alpha-1) g(y) dy``."""
    if alpha <= 0 or x <= 0:
        raise DomainError("fractional_integral needs alpha > 0 and x > 0")
    val, err = integrate.quad(g, 0.0, x, weight="alg", wvar=(0.0, alpha - 1.0), epsabs=1e-13, epsrel=1e-11, limit=200)
    if not np.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
        raise QuadratureFailure(f"fractional integral did not converge (err={err:g})")
    return float(val / special.gamma(alpha))
