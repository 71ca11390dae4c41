"""Convex moving boundaries ``f(t) = a + int_0^t f'(u) du`` and their calculus.

Polynomial kinds (``linear``, ``quadratic``, ``polynomial``) are evaluated and
integrated in closed form. A ``tabulated`` boundary is built from knots
``(t_i, f(t_i))``: the secant slopes are interpolated with a monotone cubic
(PCHIP) so that ``f'`` stays nondecreasing, ``f`` is its antiderivative, and
``f''`` is taken by central differences of ``f'``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .errors import (
    ConfigError,
    DomainError,
    NonConvexBoundary,
    NonPositiveGap,
    OutOfTabulatedRange,
    QuadratureFailure,
)

KINDS = ("linear", "quadratic", "polynomial", "tabulated")
CONVEXITY_GRID = 10_000
DEFAULT_T_MAX = 10.0
QUAD_TOL = 1e-10
_CONVEX_SLACK = 1e-12


@dataclass(frozen=True)
class Boundary:
    """Immutable moving boundary. Build it with :func:`make_boundary`."""

    kind: str
    a: float
    coefficients: tuple[float, ...] = ()
    knots: tuple[tuple[float, float], ...] = ()
    _poly: Polynomial | None = field(default=None, repr=False, compare=False)
    _dpoly: Polynomial | None = field(default=None, repr=False, compare=False)
    _d2poly: Polynomial | None = field(default=None, repr=False, compare=False)
    _sqint: Polynomial | None = field(default=None, repr=False, compare=False)
    _slope: PchipInterpolator | None = field(default=None, repr=False, compare=False)
    _slope_int: Any = field(default=None, repr=False, compare=False)

    # -- evaluation --------------------------------------------------------

    @property
    def is_polynomial(self) -> bool:
        return self.kind != "tabulated"

    @property
    def t_end(self) -> float:
        """Last time at which the boundary is defined (inf for polynomials)."""
        if self.is_polynomial:
            return np.inf
        return self.knots[-1][0]

    @property
    def df0(self) -> float:
        return float(self.eval(0.0, 1))

    def _check_range(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("boundary evaluated at negative time")
        if not self.is_polynomial and np.any(t > self.t_end * (1 + 1e-12)):
            raise OutOfTabulatedRange(
                f"t={float(np.max(t))} beyond last knot {self.t_end}"
            )
        return t

    def eval(self, t, order: int = 0):
        """Return ``f``, ``f'`` or ``f''`` at ``t`` (scalar or array)."""
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        tt = self._check_range(t)
        if self.is_polynomial:
            poly = (self._poly, self._dpoly, self._d2poly)[order]
            out = poly(tt)
        elif order == 0:
            out = self.a + self._slope_int(tt)
        elif order == 1:
            out = self._slope(tt)
        else:
            out = self._tab_curvature(tt)
        return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)

    def f(self, t):
        return self.eval(t, 0)

    def df(self, t):
        return self.eval(t, 1)

    def d2f(self, t):
        return self.eval(t, 2)

    def _tab_curvature(self, t):
        t0, t1 = self.knots[0][0], self.knots[-1][0]
        delta = 1e-5 * (t1 - t0)
        lo = np.clip(t - delta, t0, t1)
        hi = np.clip(t + delta, t0, t1)
        # one-sided at the ends; f' is nondecreasing so the quotient is >= 0
        return np.maximum((self._slope(hi) - self._slope(lo)) / (hi - lo), 0.0)

    # -- integrals ---------------------------------------------------------

    def integral_df_sq(self, t):
        """``int_0^t f'(u)^2 du``; closed form for polynomial kinds."""
        tt = self._check_range(t)
        if self.is_polynomial:
            out = self._sqint(tt)
            return float(out) if np.ndim(out) == 0 else np.asarray(out)
        vals = np.array([self._quad_df_sq(x) for x in np.atleast_1d(tt).ravel()])
        vals = vals.reshape(np.shape(tt))
        return float(vals) if np.ndim(vals) == 0 else vals

    def _quad_df_sq(self, t: float) -> float:
        if t == 0.0:
            return 0.0
        pts = [k[0] for k in self.knots if 0.0 < k[0] < t]
        val, err = integrate.quad(
            lambda u: self._slope(u) ** 2,
            0.0,
            t,
            epsabs=QUAD_TOL,
            epsrel=QUAD_TOL,
            limit=500,
            points=pts or None,
        )
        if not np.isfinite(val) or err > QUAD_TOL * max(1.0, abs(val)):
            raise QuadratureFailure(f"int (f')^2 on [0, {t}] did not converge (err={err:g})")
        return float(val)

    def integral_df(self, t0, t1):
        """``int_{t0}^{t1} f'(u) du = f(t1) - f(t0)``."""
        if np.any(np.asarray(t1) < np.asarray(t0)):
            raise DomainError("integral_df requires t0 <= t1")
        return self.eval(t1, 0) - self.eval(t0, 0)

    def has_zero_curvature(self, t_max: float | None = None) -> bool:
        """True when ``f'' == 0`` identically (checked exactly for polynomials)."""
        if self.is_polynomial:
            return bool(np.all(self._d2poly.coef == 0.0))
        t_hi = self.t_end if t_max is None else min(t_max, self.t_end)
        grid = np.linspace(0.0, t_hi, 2001)
        return bool(np.all(self.eval(grid, 2) == 0.0))

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == "tabulated":
            return {"kind": self.kind, "a": self.a, "knots": [list(k) for k in self.knots]}
        return {"kind": self.kind, "a": self.a, "coefficients": list(self.coefficients)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def scaled_curvature(self, lam: float) -> "Boundary":
        """Boundary with ``f''`` multiplied by ``lam`` and the same ``a`` and ``f'(0)``.

        Only defined for polynomial kinds.
        """
        if not self.is_polynomial:
            raise ConfigError("curvature scaling needs a polynomial boundary")
        full = list(self._poly.coef) + [0.0, 0.0]
        coefs = [full[1]] + [lam * c for c in full[2:]]
        while len(coefs) > 1 and coefs[-1] == 0.0:
            coefs.pop()
        return make_boundary("polynomial", self.a, coefs)


def _polynomial_coefficients(kind: str, coefficients: Sequence[float]) -> list[float]:
    coefs = [float(c) for c in coefficients]
    if kind == "linear" and len(coefs) != 1:
        raise ConfigError("linear boundary takes one coefficient [b]")
    if kind == "quadratic" and len(coefs) != 2:
        raise ConfigError("quadratic boundary takes two coefficients [b, c]")
    if kind == "polynomial" and not coefs:
        coefs = [0.0]
    if not all(np.isfinite(coefs)):
        raise ConfigError("non-finite boundary coefficient")
    return coefs


def make_boundary(
    kind: str,
    a: float,
    coefficients: Sequence[float] | None = None,
    *,
    knots: Sequence[Sequence[float]] | None = None,
    t_max: float = DEFAULT_T_MAX,
    n_check: int = CONVEXITY_GRID,
) -> Boundary:
    """Validate and build a boundary.

    Parameters
    ----------
    kind : {"linear", "quadratic", "polynomial", "tabulated"}
    a : float
        Starting gap ``f(0)``; must be positive.
    coefficients : sequence of float
        Polynomial coefficients beyond the constant term, lowest order first,
        so ``quadratic, [b, c]`` is ``a + b t + c t^2``.
    knots : sequence of (t, f) pairs
        Required for ``tabulated``; the first knot must be ``(0, a)``.
    t_max : float
        Right end of the convexity check grid (polynomial kinds).
    n_check : int
        Number of convexity check points.

    Raises
    ------
    NonPositiveGap, NonConvexBoundary, ConfigError
    """
    if kind not in KINDS:
        raise ConfigError(f"unknown boundary kind {kind!r}; expected one of {KINDS}")
    a = float(a)
    if not np.isfinite(a) or a <= 0.0:
        raise NonPositiveGap(f"boundary gap a={a} must be positive")

    if kind == "tabulated":
        return _make_tabulated(a, knots, n_check)

    coefs = _polynomial_coefficients(kind, coefficients or [])
    poly = Polynomial([a] + coefs)
    dpoly = poly.deriv(1)
    d2poly = poly.deriv(2)
    grid = np.linspace(0.0, float(t_max), int(n_check))
    curv = d2poly(grid)
    if np.min(curv) < -_CONVEX_SLACK:
        bad = grid[np.argmin(curv)]
        raise NonConvexBoundary(f"f''({bad:g}) = {np.min(curv):g} < 0")
    return Boundary(
        kind=kind,
        a=a,
        coefficients=tuple(coefs),
        _poly=poly,
        _dpoly=dpoly,
        _d2poly=d2poly,
        _sqint=(dpoly * dpoly).integ(lbnd=0.0),
    )


def _make_tabulated(a: float, knots, n_check: int) -> Boundary:
    if knots is None or len(knots) < 2:
        raise ConfigError("tabulated boundary needs at least two knots")
    arr = np.asarray(knots, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or not np.all(np.isfinite(arr)):
        raise ConfigError("knots must be a list of [t, f] pairs")
    t, fv = arr[:, 0], arr[:, 1]
    if t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ConfigError("knot times must start at 0 and increase strictly")
    if abs(fv[0] - a) > 1e-12 * max(1.0, abs(a)):
        raise ConfigError(f"first knot value {fv[0]} differs from a={a}")
    secants = np.diff(fv) / np.diff(t)
    if np.any(np.diff(secants) < -1e-12 * max(1.0, np.max(np.abs(secants)))):
        i = int(np.argmin(np.diff(secants)))
        raise NonConvexBoundary(f"tabulated slopes decrease near t={t[i + 1]:g}")
    mids = 0.5 * (t[:-1] + t[1:])
    nodes = np.concatenate([[t[0]], mids, [t[-1]]])
    vals = np.concatenate([[secants[0]], secants, [secants[-1]]])
    slope = PchipInterpolator(nodes, vals, extrapolate=False)
    bnd = Boundary(
        kind="tabulated",
        a=a,
        knots=tuple((float(x), float(y)) for x, y in arr),
        _slope=slope,
        _slope_int=slope.antiderivative(),
    )
    grid = np.linspace(0.0, t[-1], int(n_check))
    curv = bnd.eval(grid, 2)
    if np.min(curv) < -_CONVEX_SLACK:
        raise NonConvexBoundary("interpolated curvature negative")
    return bnd


def boundary_from_dict(spec: dict, *, t_max: float = DEFAULT_T_MAX) -> Boundary:
    """Parse the JSON boundary schema ``{"kind", "a", "coefficients" | "knots"}``."""
    if not isinstance(spec, dict):
        raise ConfigError("boundary spec must be a JSON object")
    try:
        kind = spec["kind"]
        a = spec["a"]
    except KeyError as exc:
        raise ConfigError(f"boundary spec missing field {exc.args[0]!r}") from None
    if kind == "tabulated":
        return make_boundary(kind, a, knots=spec.get("knots"), t_max=t_max)
    if "coefficients" not in spec:
        raise ConfigError("boundary spec missing field 'coefficients'")
    return make_boundary(kind, a, spec["coefficients"], t_max=t_max)


def load_boundary(path, *, t_max: float = DEFAULT_T_MAX) -> Boundary:
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read boundary file {path}: {exc}") from None
    return boundary_from_dict(spec, t_max=t_max)


# module-level aliases matching the operation names
def eval(boundary: Boundary, t, order: int = 0):  # noqa: A001 - mirrors op name
    return boundary.eval(t, order)


def integral_df_sq(boundary: Boundary, t):
    return boundary.integral_df_sq(t)


def integral_df(boundary: Boundary, t0, t1):
    return boundary.integral_df(t0, t1)
