"""Monte Carlo estimators for the first-passage law of Brownian motion to ``f``.

* :func:`fpt_direct_mc` simulates ``B`` on a grid and catches crossings
  between grid points with the Brownian-bridge probability
  ``exp(-2 d0 d1 / dt)`` against the locally linear boundary.
* :func:`fpt_density_girsanov` removes the drift ``f'`` by a change of measure
  and averages ``exp(-int f'' X)`` over Bessel-bridge paths ``X``.
* :func:`martingale_check` estimates ``E[Z_t]`` for the exponential density
  process, which must equal 1.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import chunk_rng, map_chunks
from .boundary import Boundary
from .bridge import stream_functional, time_grid
from .errors import ConfigError, DegenerateBoundary, DomainError
from .kernels import BridgeSpec, level_hitting_density

METHODS = ("girsanov_mc", "direct_mc", "fk_pde", "heat_pde", "closed_form")
HIST_BINS = 50
Z95 = 1.959963984540054
DIRECT_MIN_STEPS = 100


@dataclass(frozen=True)
class EstimateCI:
    mean: float
    std_error: float
    n: int

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "EstimateCI":
        n = int(x.size)
        se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(float(np.mean(x)), se, n)

    def within(self, target: float, k: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.mean - target) <= k * self.std_error + slack


@dataclass
class DensityCurve:
    s_grid: np.ndarray
    phi: np.ndarray
    method: str
    boundary_digest: str = ""
    ci_low: np.ndarray | None = None
    ci_high: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown density method {self.method!r}")
        self.s_grid = np.asarray(self.s_grid, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        if self.s_grid.shape != self.phi.shape:
            raise ValueError("s_grid and phi lengths differ")

    def at(self, s: float) -> float:
        return float(np.interp(s, self.s_grid, self.phi))

    def rows(self):
        lo = self.ci_low if self.ci_low is not None else [None] * len(self.phi)
        hi = self.ci_high if self.ci_high is not None else [None] * len(self.phi)
        for s, p, l, h in zip(self.s_grid, self.phi, lo, hi):
            yield s, p, l, h

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "phi", "ci_low", "ci_high", "method"])
        for s, p, l, h in self.rows():
            w.writerow([_fmt(s), _fmt(p), "" if l is None else _fmt(l), "" if h is None else _fmt(h), self.method])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "schema_version": 1,
            "method": self.method,
            "boundary_digest": self.boundary_digest,
            "rows": [
                {"s": float(_fmt(s)), "phi": float(_fmt(p)),
                 "ci_low": None if l is None else float(_fmt(l)),
                 "ci_high": None if h is None else float(_fmt(h))}
                for s, p, l, h in self.rows()
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _fmt(x: float) -> str:
    return f"{float(x):.9g}"


def read_curve_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "s" not in rows[0] or "phi" not in rows[0]:
        raise ConfigError(f"{path}: expected CSV with columns s,phi")
    s = np.array([float(r["s"]) for r in rows])
    phi = np.array([float(r["phi"]) for r in rows])
    return s, phi


# ---------------------------------------------------------------------------
# direct simulation of T


def _direct_chunk(boundary: Boundary, t: np.ndarray, rng: np.random.Generator, m: int) -> np.ndarray:
    n = t.size - 1
    dt = t[1] - t[0]
    steps = rng.standard_normal((m, n)) * math.sqrt(dt)
    unif = rng.random((m, n))
    b = np.zeros((m, n + 1))
    np.cumsum(steps, axis=1, out=b[:, 1:])
    gap = np.asarray(boundary.eval(t, 0))[None, :] - b
    d0, d1 = gap[:, :-1], gap[:, 1:]
    on_grid = d1 <= 0.0
    with np.errstate(over="ignore"):
        p_bridge = np.exp(-2.0 * np.clip(d0, 0.0, None) * np.clip(d1, 0.0, None) / dt)
    crossed = on_grid | (unif < p_bridge)
    any_cross = crossed.any(axis=1)
    first = np.argmax(crossed, axis=1)
    rows = np.arange(m)
    g0 = d0[rows, first]
    g1 = d1[rows, first]
    # linear interpolation of the gap for grid crossings, mid-step otherwise
    frac = np.where(on_grid[rows, first], g0 / np.where(g0 - g1 > 0, g0 - g1, 1.0), 0.5)
    tau = t[first] + dt * np.clip(frac, 0.0, 1.0)
    return np.where(any_cross, tau, np.inf)


def passage_times(boundary: Boundary, t_max: float, n_steps: int, n_paths: int, seed: int = 0) -> np.ndarray:
    """First-passage times (``inf`` if none before ``t_max``), chunk-ordered."""
    if boundary.eval(0.0, 0) <= 0.0:
        raise DegenerateBoundary("f(0) must be positive")
    if int(n_steps) < DIRECT_MIN_STEPS:
        raise ConfigError(f"direct MC needs n_steps >= {DIRECT_MIN_STEPS}")
    if int(n_paths) < 1 or t_max <= 0:
        raise ConfigError("direct MC needs n_paths >= 1 and t_max > 0")
    t = time_grid(float(t_max), int(n_steps))
    parts = map_chunks(lambda i, m: _direct_chunk(boundary, t, chunk_rng(seed, i), m), int(n_paths))
    return np.concatenate(parts)


def fpt_direct_mc(
    boundary: Boundary,
    t_max: float,
    n_steps: int = 1000,
    n_paths: int = 100_000,
    seed: int = 0,
    bins: int = HIST_BINS,
) -> tuple[EstimateCI, DensityCurve]:
    """Return ``P(T <= t_max)`` and a histogram density on ``bins`` uniform bins."""
    tau = passage_times(boundary, t_max, n_steps, n_paths, seed)
    hit = np.isfinite(tau) & (tau <= t_max)
    cdf = EstimateCI.from_samples(hit.astype(float))
    edges = np.linspace(0.0, t_max, bins + 1)
    counts, _ = np.histogram(tau[hit], bins=edges)
    width = np.diff(edges)
    p = counts / tau.size
    phi = p / width
    se = np.sqrt(p * (1.0 - p) / tau.size) / width
    curve = DensityCurve(
        s_grid=0.5 * (edges[:-1] + edges[1:]),
        phi=phi,
        method="direct_mc",
        boundary_digest=boundary.digest,
        ci_low=np.clip(phi - Z95 * se, 0.0, None),
        ci_high=phi + Z95 * se,
        meta={"n_paths": int(n_paths), "n_steps": int(n_steps), "seed": int(seed)},
    )
    return cdf, curve


# ---------------------------------------------------------------------------
# change of measure + Bessel bridge


def girsanov_prefactor(boundary: Boundary, s: float) -> float:
    """``exp(-a f'(0) - 1/2 int_0^s f'^2) h(s, a)``: the density when ``f'' = 0``."""
    a = boundary.a
    return math.exp(-a * boundary.df0 - 0.5 * boundary.integral_df_sq(s)) * level_hitting_density(s, a)


def _zero_curvature_on(boundary: Boundary, s: float) -> bool:
    if boundary.is_polynomial:
        return boundary.has_zero_curvature()
    return bool(np.all(boundary.eval(np.linspace(0.0, s, 2001), 2) == 0.0))


def functional_mean(
    boundary: Boundary, s: float, n_steps: int = 200, n_paths: int = 100_000, seed: int = 0, scheme: str = "three_bridge"
) -> EstimateCI:
    """``E exp(-int_0^s f''(u) X_u du)`` for the bridge from ``a`` pinned at ``s``."""
    if _zero_curvature_on(boundary, s):
        return EstimateCI(1.0, 0.0, int(n_paths))
    vals = stream_functional(boundary, BridgeSpec(boundary.a, s), n_steps, n_paths, seed, scheme)
    return EstimateCI.from_samples(vals)


def fpt_density_girsanov(
    boundary: Boundary,
    s: float,
    n_steps: int = 200,
    n_paths: int = 100_000,
    seed: int = 0,
    scheme: str = "three_bridge",
) -> EstimateCI:
    """Density of ``T`` at ``s`` via the Bessel-bridge representation.

    The deterministic prefactor multiplies both the mean and its standard
    error. When ``f''`` vanishes the functional is identically 1 and no paths
    are drawn.
    """
    if s <= 0:
        raise DomainError("density time s must be positive")
    pre = girsanov_prefactor(boundary, s)
    fm = functional_mean(boundary, s, n_steps, n_paths, seed, scheme)
    return EstimateCI(pre * fm.mean, pre * fm.std_error, fm.n)


def girsanov_curve(
    boundary: Boundary, s_grid, n_steps: int = 200, n_paths: int = 100_000, seed: int = 0, scheme: str = "three_bridge"
) -> DensityCurve:
    s_grid = np.asarray(s_grid, dtype=float)
    ests = [fpt_density_girsanov(boundary, float(s), n_steps, n_paths, seed, scheme) for s in s_grid]
    phi = np.array([e.mean for e in ests])
    se = np.array([e.std_error for e in ests])
    return DensityCurve(
        s_grid, phi, "girsanov_mc", boundary.digest,
        ci_low=np.clip(phi - Z95 * se, 0.0, None), ci_high=phi + Z95 * se,
        meta={"n_paths": int(n_paths), "n_steps": int(n_steps), "seed": int(seed), "scheme": scheme},
    )


# ---------------------------------------------------------------------------
# exponential martingale


def martingale_check(boundary: Boundary, t: float, n_steps: int = 1000, n_paths: int = 100_000, seed: int = 0) -> EstimateCI:
    """Sample mean of ``Z_t = exp(int_0^t f' dB - 1/2 int_0^t f'^2 du)``.

    The stochastic integral is the left-point (Ito) sum on a uniform grid.
    """
    if t <= 0:
        raise DomainError("martingale_check needs t > 0")
    grid = time_grid(float(t), int(n_steps))
    slope = np.asarray(boundary.eval(grid[:-1], 1), dtype=float)
    comp = 0.5 * boundary.integral_df_sq(t)
    if not np.any(slope):
        return EstimateCI(1.0, 0.0, int(n_paths))
    sqdt = math.sqrt(t / n_steps)

    def work(i: int, m: int) -> np.ndarray:
        z = chunk_rng(seed, i).standard_normal((m, int(n_steps)))
        return np.exp(sqdt * (z @ slope) - comp)

    return EstimateCI.from_samples(np.concatenate(map_chunks(work, int(n_paths))))
