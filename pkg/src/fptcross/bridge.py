"""Sampling of 3-dimensional Bessel bridges pinned at 0 at time ``s``.

Two independent schemes:

``three_bridge``
    ``X_t = |(beta1_t, beta2_t, beta3_t)|`` with ``beta1`` a Brownian bridge
    from ``a`` to 0 and ``beta2, beta3`` Brownian bridges from 0 to 0. Exact in
    law at grid points.
``sde_euler``
    Time stepping of ``dX = [1/X - X/(s-t)] dt + dW``. The singular ``1/X``
    term is taken implicitly, which keeps every step strictly positive.

Paths are produced in chunks of ``CHUNK_PATHS`` with one RNG stream per
chunk, so output never depends on how many workers run.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._parallel import CHUNK_PATHS, chunk_rng, map_chunks
from .boundary import Boundary
from .errors import ConfigError
from .kernels import BridgeSpec

SCHEMES = ("sde_euler", "three_bridge")
EPS = 1e-10
MIN_STEPS = 10


@dataclass
class PathBatch:
    spec: BridgeSpec
    n_steps: int
    n_paths: int
    seed: int
    values: np.ndarray
    scheme: str

    @property
    def dt(self) -> float:
        return self.spec.s / self.n_steps

    @property
    def t_grid(self) -> np.ndarray:
        return time_grid(self.spec.s, self.n_steps)

    @property
    def touched_zero(self) -> np.ndarray:
        """Per-path flag: some interior value is exactly 0."""
        return np.any(self.values[:, 1:-1] <= 0.0, axis=1)

    def marginal(self, u: float) -> np.ndarray:
        """Values at the grid node nearest to time ``u``."""
        j = int(round(u / self.dt))
        return self.values[:, j]

    def to_csv(self, path, max_paths: int | None = None) -> None:
        t = self.t_grid
        rows = self.values if max_paths is None else self.values[:max_paths]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path_id", "t", "x"])
            for pid, row in enumerate(rows):
                for tj, xj in zip(t, row):
                    w.writerow([pid, f"{tj:.9g}", f"{xj:.9g}"])


def time_grid(s: float, n_steps: int) -> np.ndarray:
    t = np.arange(n_steps + 1) * (s / n_steps)
    t[-1] = s
    return t


def _validate(spec: BridgeSpec, n_steps: int, n_paths: int, seed: int, scheme: str) -> None:
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown bridge scheme {scheme!r}")
    if int(n_steps) < MIN_STEPS:
        raise ConfigError(f"n_steps={n_steps} below minimum {MIN_STEPS}")
    if int(n_paths) < 1:
        raise ConfigError("n_paths must be positive")
    if int(seed) < 0 or int(seed) >= 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")


def _three_bridge_chunk(spec: BridgeSpec, n_steps: int, rng: np.random.Generator, m: int) -> np.ndarray:
    s = spec.s
    dt = s / n_steps
    frac = time_grid(s, n_steps) / s
    sq = np.zeros((m, n_steps + 1))
    sqdt = np.sqrt(dt)
    for comp in range(3):
        walk = np.zeros((m, n_steps + 1))
        np.cumsum(rng.standard_normal((m, n_steps)) * sqdt, axis=1, out=walk[:, 1:])
        br = walk - frac * walk[:, -1:]
        if comp == 0:
            br += spec.a * (1.0 - frac)
        sq += br * br
    x = np.sqrt(sq)
    x[:, 0] = spec.a
    x[:, -1] = 0.0
    return x


def _euler_chunk(spec: BridgeSpec, n_steps: int, rng: np.random.Generator, m: int) -> np.ndarray:
    s = spec.s
    dt = s / n_steps
    t = time_grid(s, n_steps)
    noise = rng.standard_normal((m, n_steps)) * np.sqrt(dt)
    x = np.empty((m, n_steps + 1))
    x[:, 0] = spec.a
    cur = np.full(m, float(spec.a))
    for i in range(n_steps - 1):
        rem = max(s - t[i], 0.5 * dt)
        # explicit pull towards 0, implicit 1/X push: X' = y + dt/X'
        y = cur - np.maximum(cur, EPS) / rem * dt + noise[:, i]
        cur = 0.5 * (y + np.sqrt(y * y + 4.0 * dt))
        x[:, i + 1] = cur
    x[:, -1] = 0.0
    return x


_CHUNK_FN = {"three_bridge": _three_bridge_chunk, "sde_euler": _euler_chunk}


def iter_chunks(spec: BridgeSpec, n_steps: int, n_paths: int, seed: int, scheme: str, fn=None):
    """Generate chunks and map ``fn(chunk_values)`` over them, in chunk order."""
    _validate(spec, n_steps, n_paths, seed, scheme)
    gen = _CHUNK_FN[scheme]

    def work(idx: int, m: int):
        vals = gen(spec, int(n_steps), chunk_rng(seed, idx), m)
        return vals if fn is None else fn(vals)

    return map_chunks(work, int(n_paths), CHUNK_PATHS)


def _sample(spec, n_steps, n_paths, seed, scheme) -> PathBatch:
    parts = iter_chunks(spec, n_steps, n_paths, seed, scheme)
    return PathBatch(spec, int(n_steps), int(n_paths), int(seed), np.concatenate(parts, axis=0), scheme)


def sample_sde(spec: BridgeSpec, n_steps: int, n_paths: int, seed: int = 0) -> PathBatch:
    return _sample(spec, n_steps, n_paths, seed, "sde_euler")


def sample_three_bridge(spec: BridgeSpec, n_steps: int, n_paths: int, seed: int = 0) -> PathBatch:
    return _sample(spec, n_steps, n_paths, seed, "three_bridge")


def sample(spec: BridgeSpec, n_steps: int, n_paths: int, seed: int = 0, scheme: str = "three_bridge") -> PathBatch:
    return _sample(spec, n_steps, n_paths, seed, scheme)


def path_integrals(values: np.ndarray, boundary: Boundary, s: float) -> np.ndarray:
    """Trapezoidal ``int_0^s f''(u) X_u du`` for each row of ``values``."""
    n_steps = values.shape[1] - 1
    t = time_grid(s, n_steps)
    weights = np.asarray(boundary.eval(t, 2), dtype=float) * (s / n_steps)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return values @ weights


def functional_from_values(values: np.ndarray, boundary: Boundary, s: float) -> np.ndarray:
    return np.exp(-path_integrals(values, boundary, s))


def functional_values(batch: PathBatch, boundary: Boundary) -> np.ndarray:
    """``exp(-int_0^s f''(u) X_u du)`` per path; each value lies in (0, 1]."""
    return functional_from_values(batch.values, boundary, batch.spec.s)


def stream_functional(
    boundary: Boundary, spec: BridgeSpec, n_steps: int, n_paths: int, seed: int = 0, scheme: str = "three_bridge"
) -> np.ndarray:
    """Functional values without holding the whole path batch in memory."""
    parts = iter_chunks(
        spec, n_steps, n_paths, seed, scheme, fn=lambda v: functional_from_values(v, boundary, spec.s)
    )
    return np.concatenate(parts)
