"""Fourier-integral solutions of the linear-potential equation and the Burgers map.

For a profile ``Pi`` the heat solution is

    omega(tau, xi) = (1/2pi) int Pi(y) exp(-y^2 tau / 2 + i y xi) dy

and ``w(t, x) = exp(1/2 int_t^s f'^2 + x f'(t)) omega(s - t, x + f(s) - f(t))``
solves ``-w_t + f''(t) x w = 1/2 w_xx``.

Integrals are real cosine/sine transforms on a truncated symmetric range,
evaluated with the trapezoidal rule (spectrally accurate for Gaussian-damped
analytic integrands). The truncation radius puts the damping factor below
1e-16 and the node spacing keeps aliased copies more than ``12 sqrt(tau)``
away from every requested ``xi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundary import Boundary
from .errors import ConfigError, NonPositiveField, QuadratureFailure
from .pde import FieldGrid

PROFILE_KINDS = ("unit", "gaussian", "polynomial", "table")
_LOG_EPS = 37.0  # -log(1e-16)
_MAX_NODES = 2_000_000


@dataclass(frozen=True)
class SpectralProfile:
    """The arbitrary function ``Pi`` of the Fourier representation.

    ``unit``        Pi = 1
    ``gaussian``    params (A, c): Pi(y) = A exp(-c y^2 / 2), c >= 0
    ``polynomial``  params (c0, c1, ...): Pi(y) = sum_k c_k (i y)^k, giving
                    omega = sum_k c_k d^k/dxi^k k(tau, xi)
    ``table``       params (y1, p1, y2, p2, ...): real Pi interpolated
                    linearly, zero outside the table
    """

    kind: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ConfigError(f"unknown profile kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind == "gaussian":
            if len(self.params) != 2 or self.params[1] < 0:
                raise ConfigError("gaussian profile needs (amplitude, width >= 0)")
        if self.kind == "table":
            if len(self.params) < 4 or len(self.params) % 2:
                raise ConfigError("table profile needs (y, Pi) pairs")
            ys = np.asarray(self.params[0::2])
            if np.any(np.diff(ys) <= 0):
                raise ConfigError("table profile nodes must increase")

    @classmethod
    def unit(cls) -> "SpectralProfile":
        return cls("unit")

    @classmethod
    def gaussian(cls, amplitude: float = 1.0, width: float = 1.0) -> "SpectralProfile":
        return cls("gaussian", (amplitude, width))

    @property
    def extra_damping(self) -> float:
        return self.params[1] if self.kind == "gaussian" else 0.0

    @property
    def degree(self) -> int:
        return len(self.params) - 1 if self.kind == "polynomial" else 0

    def support(self) -> float:
        if self.kind == "table":
            ys = self.params[0::2]
            return max(abs(ys[0]), abs(ys[-1]))
        return math.inf

    def cos_sin_parts(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Even coefficient of ``cos(y xi)`` and of ``sin(y xi)`` in ``Re[Pi(y) e^{i y xi}]``."""
        if self.kind == "unit":
            return np.ones_like(y), np.zeros_like(y)
        if self.kind == "gaussian":
            amp, c = self.params
            return amp * np.exp(-0.5 * c * y * y), np.zeros_like(y)
        if self.kind == "table":
            ys = np.asarray(self.params[0::2])
            ps = np.asarray(self.params[1::2])
            even = 0.5 * (np.interp(y, ys, ps, left=0.0, right=0.0) + np.interp(-y, ys, ps, left=0.0, right=0.0))
            return even, np.zeros_like(y)
        cpart = np.zeros_like(y)
        spart = np.zeros_like(y)
        for k, ck in enumerate(self.params):
            if ck == 0.0:
                continue
            if k % 2 == 0:
                cpart += ck * (-1.0) ** (k // 2) * y**k
            else:
                spart -= ck * (-1.0) ** ((k - 1) // 2) * y**k
        return cpart, spart


def _nodes(profile: SpectralProfile, tau: float, xi_span: float) -> tuple[np.ndarray, float]:
    damp = tau + profile.extra_damping
    if not damp > 0:
        raise QuadratureFailure("profile integrand is not damped (tau + width <= 0)")
    radius = math.sqrt(2.0 * _LOG_EPS / damp)
    for _ in range(3):
        radius = math.sqrt(2.0 * (_LOG_EPS + profile.degree * math.log(max(radius, 1.0))) / damp)
    radius = min(radius, profile.support())
    step = 2.0 * math.pi / (xi_span + 12.0 * math.sqrt(damp) + 2.0 * profile.degree + 1.0)
    if profile.kind == "table":
        ys = np.asarray(profile.params[0::2])
        step = min(step, float(np.min(np.diff(ys))) / 16.0)
    n = int(math.ceil(radius / step)) + 1
    if n > _MAX_NODES:
        raise QuadratureFailure(f"{n} quadrature nodes needed (tau={tau:g}, |xi|<={xi_span:g})")
    y = np.linspace(0.0, radius, n)
    return y, y[1] - y[0] if n > 1 else radius


def omega_from_profile(profile: SpectralProfile, tau: float, xi):
    """Heat solution ``omega(tau, xi)`` for profile ``Pi``; vectorized in ``xi``."""
    if not tau > 0:
        raise QuadratureFailure("omega_from_profile needs tau > 0")
    xi_arr = np.asarray(xi, dtype=float)
    flat = xi_arr.ravel()
    y, dy = _nodes(profile, float(tau), float(np.max(np.abs(flat))) if flat.size else 0.0)
    cpart, spart = profile.cos_sin_parts(y)
    wts = np.full(y.size, dy)
    wts[0] *= 0.5
    damp = np.exp(-0.5 * y * y * tau) * wts
    phase = np.outer(flat, y)
    out = np.cos(phase) @ (cpart * damp)
    if np.any(spart):
        out += np.sin(phase) @ (spart * damp)
    out /= math.pi  # (1/2pi) * 2 for the half range
    if not np.all(np.isfinite(out)):
        raise QuadratureFailure("non-finite Fourier integral")
    out = out.reshape(xi_arr.shape)
    return float(out) if out.ndim == 0 else out


def gauge_factor(boundary: Boundary, s: float, t: float, x):
    """``exp(1/2 int_t^s f'^2 + x f'(t))`` and the shift ``int_t^s f'``."""
    half_sq = 0.5 * (boundary.integral_df_sq(s) - boundary.integral_df_sq(t))
    shift = boundary.integral_df(t, s)
    return np.exp(half_sq + np.asarray(x, dtype=float) * boundary.eval(t, 1)), shift


def fourier_w(profile: SpectralProfile, boundary: Boundary, s: float, t: float, x):
    """Linear-potential solution ``w(t, x)`` built from ``Pi``; requires ``0 <= t < s``."""
    if not (0.0 <= t < s):
        raise QuadratureFailure(f"fourier_w needs 0 <= t < s (t={t}, s={s})")
    factor, shift = gauge_factor(boundary, s, t, x)
    out = factor * omega_from_profile(profile, s - t, np.asarray(x, dtype=float) + shift)
    return float(out) if np.ndim(out) == 0 else out


def w_field(profile: SpectralProfile, boundary: Boundary, s: float, t_grid, x_grid) -> FieldGrid:
    t_grid = np.asarray(t_grid, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    vals = np.vstack([fourier_w(profile, boundary, s, float(t), x_grid) for t in t_grid])
    return FieldGrid(t_grid, x_grid, vals, "w_field")


def omega_field(profile: SpectralProfile, tau_grid, xi_grid) -> FieldGrid:
    tau_grid = np.asarray(tau_grid, dtype=float)
    xi_grid = np.asarray(xi_grid, dtype=float)
    vals = np.vstack([omega_from_profile(profile, float(tau), xi_grid) for tau in tau_grid])
    return FieldGrid(tau_grid, xi_grid, vals, "omega_field")


def heat_residual(ofield: FieldGrid) -> float:
    """``max |omega_tau - 1/2 omega_xixi|`` over interior nodes."""
    v = ofield.values
    dt, dx = ofield.dt, ofield.dx
    vt = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2.0 * dt)
    vxx = (v[1:-1, 2:] - 2.0 * v[1:-1, 1:-1] + v[1:-1, :-2]) / dx**2
    return float(np.max(np.abs(vt - 0.5 * vxx)))


def kappa_field(wfield: FieldGrid) -> FieldGrid:
    """``kappa = -d/dx log w`` by centred differences (drops the edge columns)."""
    if np.any(wfield.values <= 0):
        raise NonPositiveField("kappa = -(log w)_x needs w > 0")
    logw = np.log(wfield.values)
    kap = -(logw[:, 2:] - logw[:, :-2]) / (2.0 * wfield.dx)
    return FieldGrid(wfield.t_grid, wfield.x_grid[1:-1], kap, "kappa_field")


def burgers_residual(wfield: FieldGrid, boundary: Boundary) -> float:
    """``max |kappa kappa_x - kappa_t - 1/2 kappa_xx - f''(t)|`` with ``kappa = -(log w)_x``."""
    kf = kappa_field(wfield)
    k = kf.values
    dt, dx = kf.dt, kf.dx
    core = k[1:-1, 1:-1]
    kt = (k[2:, 1:-1] - k[:-2, 1:-1]) / (2.0 * dt)
    kx = (k[1:-1, 2:] - k[1:-1, :-2]) / (2.0 * dx)
    kxx = (k[1:-1, 2:] - 2.0 * core + k[1:-1, :-2]) / dx**2
    curv = np.asarray(boundary.eval(kf.t_grid[1:-1], 2), dtype=float)[:, None]
    return float(np.max(np.abs(core * kx - kt - 0.5 * kxx - curv)))
