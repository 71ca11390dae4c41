"""Closed-form densities used throughout.

``k``: heat kernel ``exp(-kappa^2 / (2 sigma)) / sqrt(2 pi sigma)``;
``h``: level-hitting density ``|a| / sqrt(2 pi s^3) exp(-a^2 / (2 s))``;
``G``: transition density of the 3-dimensional Bessel bridge pinned at 0 at time ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DomainError, QuadratureFailure

_TINY_SIGMA = 1e-14
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class BridgeSpec:
    """Bessel bridge started at ``a >= 0`` and pinned at 0 at time ``s > 0``."""

    a: float
    s: float

    def __post_init__(self):
        if not (self.s > 0.0 and np.isfinite(self.s)):
            raise DomainError(f"bridge pinning time s={self.s} must be positive")
        if not (self.a >= 0.0 and np.isfinite(self.a)):
            raise DomainError(f"bridge start a={self.a} must be nonnegative")

    def std(self, u):
        """Standard deviation ``sqrt(u (s-u) / s)`` of each Brownian-bridge coordinate."""
        u = np.asarray(u, dtype=float)
        return np.sqrt(np.clip(u * (self.s - u), 0.0, None) / self.s)


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def level_hitting_density(s, a):
    s = np.asarray(s, dtype=float)
    a = np.asarray(a, dtype=float)
    if np.any(s <= 0) or np.any(a == 0):
        raise DomainError("level_hitting_density needs s > 0 and a != 0")
    out = np.abs(a) / np.sqrt(2.0 * np.pi * s**3) * np.exp(-(a**2) / (2.0 * s))
    return _scalar_or_array(out)


def level_hitting_cdf(t, a):
    """``P(T_a <= t) = 2 (1 - Phi(a / sqrt(t)))``; ``t = inf`` gives 1."""
    t = np.asarray(t, dtype=float)
    a = np.asarray(a, dtype=float)
    if np.any(t <= 0) or np.any(a <= 0):
        raise DomainError("level_hitting_cdf needs t > 0 and a > 0")
    with np.errstate(divide="ignore"):
        z = a / np.sqrt(t)
    out = special.erfc(z / math.sqrt(2.0))
    return _scalar_or_array(out)


def heat_kernel(sigma, kappa):
    sigma = np.asarray(sigma, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    if np.any(sigma <= 0):
        raise DomainError("heat_kernel needs sigma > 0")
    out = np.exp(-(kappa**2) / (2.0 * sigma)) / np.sqrt(2.0 * np.pi * sigma)
    out = np.where(sigma < _TINY_SIGMA, np.where(kappa == 0, np.inf, 0.0), out)
    return _scalar_or_array(out)


def absorbed_density(t, x, y, a):
    """Density at ``y`` of Brownian motion started at ``x`` and still below ``a``
    after elapsed time ``t``: ``k(t, y-x) - k(t, 2a-y-x)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x >= a) or np.any(y > a):
        raise DomainError("absorbed_density needs x < a and y <= a")
    if np.any(np.asarray(t) <= 0):
        raise DomainError("absorbed_density needs t > 0")
    out = heat_kernel(t, y - x) - heat_kernel(t, 2.0 * a - y - x)
    return _scalar_or_array(np.maximum(out, 0.0))


def _log_bridge_transition(s, t, x, tau, y):
    # log of (y/x)((s-t)/(s-tau)) k(s-tau,y)/k(s-t,x) k(tau-t,y-x), factored so
    # nothing underflows; the reflected term enters as -expm1(-2xy/(tau-t)).
    dt = tau - t
    return (
        np.log(y / x)
        + 1.5 * np.log((s - t) / (s - tau))
        - _LOG_SQRT_2PI
        - 0.5 * np.log(dt)
        - y**2 / (2.0 * (s - tau))
        + x**2 / (2.0 * (s - t))
        - (y - x) ** 2 / (2.0 * dt)
    )


def bridge_transition(spec: BridgeSpec, t, x, tau, y):
    """Transition density ``G(t, x; tau, y)`` of the Bessel bridge ``spec``.

    Requires ``0 <= t < tau < s``, ``x > 0`` and ``y >= 0``; vectorized in ``y``.
    """
    s = spec.s
    if not (0.0 <= t < tau < s):
        raise DomainError(f"bridge_transition needs 0 <= t < tau < s (t={t}, tau={tau}, s={s})")
    x = float(x)
    if x <= 0.0:
        raise DomainError("bridge_transition needs x > 0")
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("bridge_transition needs y >= 0")
    out = np.zeros_like(y)
    pos = y > 0
    yp = y[pos]
    logg = _log_bridge_transition(s, t, x, tau, yp)
    out[pos] = np.exp(logg) * (-np.expm1(-2.0 * x * yp / (tau - t)))
    return _scalar_or_array(out)


def _bridge_support(spec: BridgeSpec, u: float) -> float:
    mean_line = spec.a * (1.0 - u / spec.s)
    return mean_line + 12.0 * float(spec.std(u)) + 1e-300


def bridge_mean(spec: BridgeSpec, u, *, tol: float = 1e-11):
    """Mean of the bridge at time ``u``.

    ``a = 0`` uses the closed form ``2 sqrt(2/pi) sqrt(u (s-u) / s)``; ``a > 0``
    integrates ``y G(0, a; u, y)`` numerically. ``u`` may be an array.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0) or np.any(u_arr > spec.s):
        raise DomainError("bridge_mean needs 0 <= u <= s")
    if spec.a == 0.0:
        return _scalar_or_array(2.0 * math.sqrt(2.0 / math.pi) * spec.std(u_arr))
    out = np.empty(u_arr.shape)
    for idx, uu in np.ndenumerate(u_arr):
        if uu == 0.0:
            out[idx] = spec.a
        elif uu == spec.s:
            out[idx] = 0.0
        else:
            out[idx] = _quad_bridge_moment(spec, float(uu), 1, tol)
    return _scalar_or_array(out)


def _quad_bridge_moment(spec: BridgeSpec, u: float, power: int, tol: float) -> float:
    hi = _bridge_support(spec, u)
    centre = spec.a * (1.0 - u / spec.s)
    val, err = integrate.quad(
        lambda y: y**power * bridge_transition(spec, 0.0, spec.a, u, y),
        0.0,
        hi,
        points=[centre] if 0.0 < centre < hi else None,
        epsabs=tol,
        epsrel=tol,
        limit=400,
    )
    if not np.isfinite(val) or err > 100 * tol * max(1.0, abs(val)):
        raise QuadratureFailure(f"bridge moment at u={u} did not converge (err={err:g})")
    return float(val)


def bridge_marginal_cdf(spec: BridgeSpec, u: float, *, n_grid: int = 200_001):
    """Return a vectorized CDF of the bridge marginal at time ``u``.

    Built by cumulative trapezoid integration of ``G(0, a; u, .)``
    on a fine grid and renormalized to 1 at the right end.
    """
    if spec.a == 0.0:
        sd = float(spec.std(u))

        def cdf0(y):
            # modulus of a centred 3-D Gaussian (Maxwell law)
            z = np.asarray(y, dtype=float) / sd
            z = np.clip(z, 0.0, None)
            return special.erf(z / math.sqrt(2.0)) - math.sqrt(2.0 / math.pi) * z * np.exp(-0.5 * z**2)

        return cdf0
    hi = _bridge_support(spec, u)
    grid = np.linspace(0.0, hi, n_grid)
    dens = bridge_transition(spec, 0.0, spec.a, u, grid)
    cum = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
    cum /= cum[-1]

    def cdf(y):
        return np.interp(np.asarray(y, dtype=float), grid, cum, left=0.0, right=1.0)

    return cdf


def linear_boundary_density(s, a: float, b: float):
    """First-passage density of Brownian motion to ``a + b t``:
    ``a / sqrt(2 pi s^3) exp(-(a + b s)^2 / (2 s))``."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0) or a <= 0:
        raise DomainError("linear_boundary_density needs s > 0 and a > 0")
    out = a / np.sqrt(2.0 * np.pi * s**3) * np.exp(-((a + b * s) ** 2) / (2.0 * s))
    return _scalar_or_array(out)


def linear_boundary_cdf(t, a: float, b: float):
    """``P(T <= t) = Phi(-(a + b t)/sqrt t) + exp(-2ab) Phi((b t - a)/sqrt t)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or a <= 0:
        raise DomainError("linear_boundary_cdf needs t > 0 and a > 0")
    rt = np.sqrt(t)
    out = special.ndtr(-(a + b * t) / rt) + np.exp(-2.0 * a * b) * special.ndtr((b * t - a) / rt)
    return _scalar_or_array(out)
