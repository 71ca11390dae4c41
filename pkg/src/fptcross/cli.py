"""Command-line front end: ``fpt density|validate|bridge|bounds``.

Exit codes: 0 success, 1 failed check, 2 invalid configuration, 3 numerical
failure. Errors are reported on stderr as ``<ErrorName>: message``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import bounds as bnd
from . import bridge, montecarlo, pde, spectral
from .boundary import Boundary, boundary_from_dict, load_boundary
from .errors import ConfigError, FPTError
from .kernels import BridgeSpec, bridge_marginal_cdf, bridge_mean, heat_kernel, linear_boundary_density

SCHEMA_VERSION = 1
DEFAULT_BOUNDARY = {"kind": "linear", "a": 1.0, "coefficients": [1.0]}


@dataclass
class RunConfig:
    boundary: Boundary
    method: str = "closed_form"
    s_grid: list[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    t_max: float | None = None
    n_paths: int = 20_000
    n_steps: int = 200
    n_t: int = 400
    n_x: int = 400
    seed: int = 0
    output_path: str | None = None
    format: str = "csv"
    scheme: str = "three_bridge"
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.method not in montecarlo.METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.n_paths < 1 or self.n_steps < 1 or self.n_t < 2 or self.n_x < 2:
            raise ConfigError("paths, steps and grid sizes must be positive")
        if not self.s_grid or any(not (s > 0 and math.isfinite(s)) for s in self.s_grid):
            raise ConfigError("s values must be positive and finite")
        if list(self.s_grid) != sorted(set(self.s_grid)):
            raise ConfigError("s values must be strictly increasing")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.scheme not in bridge.SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")


# ---------------------------------------------------------------------------
# parsing


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}") from None


def _parse_grid(text: str) -> tuple[int, int]:
    parts = str(text).split(",")
    if len(parts) != 2:
        raise ConfigError("--grid expects NT,NX")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}") from None


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge an optional ``--config`` JSON file with command-line flags (flags win)."""
    doc: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")

    def pick(name, key=None):
        val = getattr(args, name, None)
        return val if val is not None else doc.get(key or name)

    if args.boundary:
        boundary = load_boundary(args.boundary)
    elif "boundary" in doc:
        boundary = boundary_from_dict(doc["boundary"])
    else:
        boundary = boundary_from_dict(DEFAULT_BOUNDARY)

    cfg = RunConfig(boundary=boundary)
    if pick("method") is not None:
        cfg.method = pick("method")
    t_max = pick("t_max")
    s_val = pick("s")
    if s_val is not None:
        cfg.s_grid = s_val if isinstance(s_val, list) else _parse_floats(s_val)
    elif t_max is not None:
        points = int(pick("points") or 20)
        cfg.s_grid = [float(t_max) * (i + 1) / points for i in range(points)]
    cfg.t_max = float(t_max) if t_max is not None else None
    for attr, key in (("paths", "n_paths"), ("steps", "n_steps"), ("seed", "seed")):
        val = pick(attr, key)
        if val is not None:
            try:
                setattr(cfg, key, int(val))
            except (TypeError, ValueError):
                raise ConfigError(f"{key} must be an integer") from None
    grid = pick("grid")
    if grid is not None:
        cfg.n_t, cfg.n_x = grid if isinstance(grid, list) else _parse_grid(grid)
    cfg.output_path = pick("out", "output_path")
    if pick("format") is not None:
        cfg.format = pick("format")
    if pick("scheme") is not None:
        cfg.scheme = pick("scheme")
    cfg.validate()
    return cfg


def _write_atomic(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".fpt-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# density dispatch


def _linear_slope(boundary: Boundary) -> float:
    if boundary.kind == "linear" or (
        boundary.is_polynomial and boundary.has_zero_curvature()
    ):
        return boundary.df0
    raise ConfigError("closed_form method needs a linear (or constant) boundary")


def density_curve(cfg: RunConfig) -> montecarlo.DensityCurve:
    b = cfg.boundary
    s = np.asarray(cfg.s_grid, dtype=float)
    if cfg.method == "closed_form":
        slope = _linear_slope(b)
        return montecarlo.DensityCurve(s, linear_boundary_density(s, b.a, slope), "closed_form", b.digest)
    if cfg.method == "girsanov_mc":
        return montecarlo.girsanov_curve(b, s, cfg.n_steps, cfg.n_paths, cfg.seed, cfg.scheme)
    if cfg.method == "fk_pde":
        return pde.fk_curve(b, s, cfg.n_t, cfg.n_x)
    if cfg.method == "heat_pde":
        full = pde.solve_killed_heat(b, float(s[-1]), cfg.n_t, cfg.n_x)
        return montecarlo.DensityCurve(
            s, np.interp(s, full.s_grid, full.phi), "heat_pde", b.digest, meta={"n_t": cfg.n_t, "n_y": cfg.n_x}
        )
    t_max = cfg.t_max if cfg.t_max is not None else float(s[-1])
    _, curve = montecarlo.fpt_direct_mc(b, t_max, max(cfg.n_steps, montecarlo.DIRECT_MIN_STEPS), cfg.n_paths, cfg.seed)
    return curve


def cmd_density(cfg: RunConfig) -> int:
    curve = density_curve(cfg)
    _write_atomic(cfg.output_path, curve.to_csv() if cfg.format == "csv" else curve.to_json())
    return 0


# ---------------------------------------------------------------------------
# bridge diagnostics


def bridge_moments(spec: BridgeSpec, us, n_steps: int, n_paths: int, seed: int, scheme: str) -> list[dict]:
    batch = bridge.sample(spec, n_steps, n_paths, seed, scheme)
    rows = []
    for u in us:
        col = batch.marginal(u)
        est = montecarlo.EstimateCI.from_samples(col)
        ks = stats.kstest(col, bridge_marginal_cdf(spec, u))
        rows.append(
            {
                "u": float(u),
                "mean": est.mean,
                "std_error": est.std_error,
                "oracle_mean": float(bridge_mean(spec, u)),
                "ks_stat": float(ks.statistic),
                "ks_pvalue": float(ks.pvalue),
            }
        )
    return rows


def cmd_bridge(cfg: RunConfig) -> int:
    a = float(cfg.extra.get("a", cfg.boundary.a))
    s = float(cfg.s_grid[-1])
    spec = BridgeSpec(a, s)
    mode = cfg.extra.get("mode", "moments")
    if mode == "paths":
        batch = bridge.sample(spec, cfg.n_steps, cfg.n_paths, cfg.seed, cfg.scheme)
        tg = batch.t_grid
        lines = ["path_id,t,x"]
        for pid, row in enumerate(batch.values):
            lines.extend(f"{pid},{tj:.9g},{xj:.9g}" for tj, xj in zip(tg, row))
        _write_atomic(cfg.output_path, "\n".join(lines) + "\n")
        return 0
    us = cfg.extra.get("u") or [0.25 * s, 0.5 * s, 0.75 * s]
    rows = bridge_moments(spec, us, cfg.n_steps, cfg.n_paths, cfg.seed, cfg.scheme)
    if cfg.format == "json":
        text = json.dumps({"schema_version": SCHEMA_VERSION, "a": a, "s": s, "scheme": cfg.scheme, "rows": rows},
                          indent=2, sort_keys=True) + "\n"
    else:
        cols = ["u", "mean", "std_error", "oracle_mean", "ks_stat", "ks_pvalue"]
        text = ",".join(cols) + "\n" + "".join(",".join(f"{r[c]:.9g}" for c in cols) + "\n" for r in rows)
    _write_atomic(cfg.output_path, text)
    return 0


# ---------------------------------------------------------------------------
# bounds


def cmd_bounds(cfg: RunConfig) -> int:
    env = bnd.theorem_envelope(cfg.boundary, cfg.s_grid)
    check = cfg.extra.get("check_curve")
    if check is not None:
        s, phi = montecarlo.read_curve_csv(check)
        inside = bnd.theorem_envelope(cfg.boundary, s).contains(s, phi, rel_tol=cfg.extra.get("tol", 0.02))
    if cfg.format == "json":
        text = json.dumps(
            {"schema_version": SCHEMA_VERSION, "rows": [
                {"s": float(f"{s:.9g}"), "lower": float(f"{lo:.9g}"), "upper": float(f"{hi:.9g}")}
                for s, lo, hi in zip(env.s_grid, env.lower, env.upper)]},
            indent=2, sort_keys=True) + "\n"
    else:
        text = env.to_csv()
    _write_atomic(cfg.output_path, text)
    if check is not None and not np.all(inside):
        bad = [float(x) for x in np.asarray(s)[~inside]]
        print(f"EnvelopeViolation: curve leaves the envelope at s={bad}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# validation suite


def _check(name: str, passed: bool, observed: float, tolerance: float) -> dict:
    return {
        "check_name": name,
        "status": "pass" if passed else "fail",
        "observed": float(f"{observed:.9g}"),
        "tolerance": float(f"{tolerance:.9g}"),
    }


def _orders(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return np.log2(v[:-1] / v[1:])


def run_validation(cfg: RunConfig) -> list[dict]:
    """Cross-method checks on ``cfg.boundary`` at the configured scale."""
    b = cfg.boundary
    s_grid = np.asarray(cfg.s_grid, dtype=float)
    checks: list[dict] = []

    mc_curve = montecarlo.girsanov_curve(b, s_grid, cfg.n_steps, cfg.n_paths, cfg.seed, cfg.scheme)
    fk = pde.fk_curve(b, s_grid, cfg.n_t, cfg.n_x)
    heat_full = pde.solve_killed_heat(b, float(s_grid[-1]), cfg.n_t, cfg.n_x)
    heat = np.interp(s_grid, heat_full.s_grid, heat_full.phi)
    pre = np.array([montecarlo.girsanov_prefactor(b, float(s)) for s in s_grid])
    mc_se = (mc_curve.ci_high - mc_curve.phi) / montecarlo.Z95

    if b.is_polynomial and b.has_zero_curvature():
        exact = linear_boundary_density(s_grid, b.a, b.df0)
        dev = float(np.max(np.abs(mc_curve.phi / exact - 1.0)))
        checks.append(_check("girsanov_vs_closed_form", dev <= 1e-12, dev, 1e-12))
        dev = float(np.max(np.abs(fk.phi / exact - 1.0)))
        checks.append(_check("fk_pde_vs_closed_form", dev <= 0.02, dev, 0.02))
        dev = float(np.max(np.abs(heat / exact - 1.0)))
        checks.append(_check("heat_pde_vs_closed_form", dev <= 0.02, dev, 0.02))

    tol = 0.02 + float(np.max(3.0 * mc_se / mc_curve.phi))
    pairs = {"girsanov_vs_fk": (mc_curve.phi, fk.phi), "girsanov_vs_heat": (mc_curve.phi, heat), "fk_vs_heat": (fk.phi, heat)}
    for name, (x, y) in pairs.items():
        dev = float(np.max(np.abs(x - y) / np.maximum(np.abs(x), np.abs(y))))
        checks.append(_check(f"agreement_{name}", dev <= tol, dev, tol))

    env = bnd.theorem_envelope(b, s_grid)
    for name, phi in (("girsanov_mc", mc_curve.phi), ("fk_pde", fk.phi), ("heat_pde", heat)):
        inside = env.contains(s_grid, phi, rel_tol=tol)
        worst = float(np.max(np.maximum(env.lower - phi, phi - env.upper) / env.upper))
        checks.append(_check(f"envelope_{name}", bool(np.all(inside)), worst, tol))
    lin = b.scaled_curvature(0.0) if b.is_polynomial else None
    if lin is not None:
        gap = float(np.max(bnd.theorem_envelope(lin, s_grid).log_gap))
        checks.append(_check("envelope_collapse_zero_curvature", gap == 0.0, gap, 0.0))

    # direct simulation against the PDE cumulative distribution
    t_max = float(s_grid[-1])
    cdf, _ = montecarlo.fpt_direct_mc(b, t_max, max(cfg.n_steps, 100) * 5, cfg.n_paths, cfg.seed)
    heat_cdf = float(np.trapezoid(np.concatenate([[0.0], heat_full.phi]), np.concatenate([[0.0], heat_full.s_grid])))
    heat_cdf += heat_full.meta["lost_initial"]
    tol_cdf = 3.0 * cdf.std_error + 0.005
    checks.append(_check("direct_mc_cdf_vs_heat_pde", abs(cdf.mean - heat_cdf) <= tol_cdf, abs(cdf.mean - heat_cdf), tol_cdf))

    mart = montecarlo.martingale_check(b, 1.0, 1000, cfg.n_paths, cfg.seed)
    checks.append(_check("martingale_mean", mart.within(1.0), abs(mart.mean - 1.0), 3.0 * mart.std_error))

    spec = BridgeSpec(b.a, 1.0)
    n_ks = min(cfg.n_paths, 10_000)
    exact_b = bridge.sample_three_bridge(spec, 1000, n_ks, cfg.seed)
    euler_b = bridge.sample_sde(spec, 1000, n_ks, cfg.seed + 1)
    pmin = min(float(stats.ks_2samp(exact_b.marginal(u), euler_b.marginal(u)).pvalue) for u in (0.25, 0.5, 0.75))
    checks.append(_check("bridge_two_sample_ks_pvalue", pmin >= 0.01, pmin, 0.01))
    p1 = float(stats.kstest(exact_b.marginal(0.5), bridge_marginal_cdf(spec, 0.5)).pvalue)
    checks.append(_check("bridge_one_sample_ks_pvalue", p1 >= 0.01, p1, 0.01))

    # Fourier solutions: residual order, gauge identity, Burgers map
    s_w = 1.0
    res_w, res_b = [], []
    gauge_dev = 0.0
    for k in range(4):
        h = 0.02 / 2**k
        tg = np.arange(0.0, 0.5 + h / 2, h)
        xg = np.arange(0.5, 1.5 + h / 2, h)
        wf = spectral.w_field(spectral.SpectralProfile.gaussian(), b, s_w, tg, xg)
        res_w.append(pde.residual_w(wf, b, s_w))
        res_b.append(spectral.burgers_residual(wf, b))
    order_w = float(np.min(_orders(res_w)))
    checks.append(_check("schrodinger_residual_order", order_w >= 1.8, order_w, 1.8))
    order_b = float(np.min(_orders(res_b))) if max(res_b) > 1e-9 else 2.0
    checks.append(_check("burgers_residual_order", order_b >= 1.8, order_b, 1.8))
    prof = spectral.SpectralProfile.unit()
    xs = np.linspace(0.2, 3.0, 15)
    for t in (0.0, 0.3, 0.7):
        fac, shift = spectral.gauge_factor(b, s_w, t, xs)
        lhs = spectral.fourier_w(prof, b, s_w, t, xs)
        rhs = fac * spectral.omega_from_profile(prof, s_w - t, xs + shift)
        gauge_dev = max(gauge_dev, float(np.max(np.abs(lhs - rhs))))
    checks.append(_check("fourier_gauge_identity", gauge_dev <= 1e-10, gauge_dev, 1e-10))
    flat = boundary_from_dict(DEFAULT_BOUNDARY)
    wk = pde.FieldGrid.from_function(lambda t, x: heat_kernel(1.0 - t, x), np.arange(1001) * 1e-5, np.arange(0.5, 1.5 + 1e-9, 0.01), "w_field")
    bres = spectral.burgers_residual(wk, flat)
    checks.append(_check("burgers_heat_kernel_identity", bres <= 1e-8, bres, 1e-8))
    return checks


def cmd_validate(cfg: RunConfig) -> int:
    checks = run_validation(cfg)
    ok = all(c["status"] == "pass" for c in checks)
    report = {
        "schema_version": SCHEMA_VERSION,
        "boundary": cfg.boundary.to_dict(),
        "config": {"n_paths": cfg.n_paths, "n_steps": cfg.n_steps, "grid": [cfg.n_t, cfg.n_x],
                   "seed": cfg.seed, "s": list(cfg.s_grid)},
        "checks": checks,
        "all_passed": ok,
    }
    _write_atomic(cfg.output_path, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration; flags override it")
    common.add_argument("--boundary", help="boundary JSON file")
    common.add_argument("--method", choices=montecarlo.METHODS)
    common.add_argument("--s", help="density time or comma-separated list")
    common.add_argument("--t-max", dest="t_max", type=float)
    common.add_argument("--points", type=int, help="grid points on (0, t_max] when --s is absent")
    common.add_argument("--paths", type=int)
    common.add_argument("--steps", type=int)
    common.add_argument("--grid", help="NT,NX for the PDE solvers")
    common.add_argument("--seed", type=int)
    common.add_argument("--scheme", choices=bridge.SCHEMES)
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "json"))

    p = argparse.ArgumentParser(prog="fpt", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("density", parents=[common], help="density curve by one method")
    sub.add_parser("validate", parents=[common], help="run the cross-validation suite")
    pb = sub.add_parser("bridge", parents=[common], help="Bessel-bridge paths or marginal moments")
    pb.add_argument("--a", type=float, help="bridge start (default: boundary gap)")
    pb.add_argument("--mode", choices=("moments", "paths"), default="moments")
    pb.add_argument("--u", help="comma-separated marginal times")
    pc = sub.add_parser("bounds", parents=[common], help="Jensen envelope")
    pc.add_argument("--check-curve", dest="check_curve", help="density CSV to test against the envelope")
    pc.add_argument("--tol", type=float, default=0.02, help="relative band for --check-curve")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command == "bridge":
            cfg.extra["mode"] = args.mode
            if args.a is not None:
                if args.a < 0:
                    raise ConfigError("--a must be nonnegative")
                cfg.extra["a"] = args.a
            if args.u:
                cfg.extra["u"] = _parse_floats(args.u)
            return cmd_bridge(cfg)
        if args.command == "bounds":
            cfg.extra["tol"] = args.tol
            if args.check_curve:
                cfg.extra["check_curve"] = args.check_curve
            return cmd_bounds(cfg)
        if args.command == "validate":
            return cmd_validate(cfg)
        return cmd_density(cfg)
    except ConfigError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except FPTError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
