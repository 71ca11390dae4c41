import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import golden as G
from fptcross.boundary import make_boundary
from fptcross.bounds import theorem_envelope
from fptcross.errors import ConfigError, DomainError
from fptcross.kernels import level_hitting_density, linear_boundary_cdf
from fptcross.montecarlo import (
    DensityCurve,
    EstimateCI,
    fpt_density_girsanov,
    fpt_direct_mc,
    girsanov_curve,
    girsanov_prefactor,
    martingale_check,
    passage_times,
    read_curve_csv,
)

# -- direct simulation -------------------------------------------------------------


def test_direct_linear_cdf(linear):
    cdf, curve = fpt_direct_mc(linear, 1.0, 1000, 30_000, seed=1)
    assert cdf.within(G.LINEAR_CDF_1)
    assert curve.s_grid.size == 50 and curve.method == "direct_mc"


def test_direct_constant_cdf(flat):
    cdf, _ = fpt_direct_mc(flat, 1.0, 1000, 30_000, seed=2)
    assert cdf.within(G.LEVEL_CDF_1_1)


def test_direct_unreachable():
    far = make_boundary("linear", 10.0, [0.0])
    cdf, curve = fpt_direct_mc(far, 0.01, 100, 5000, seed=0)
    assert cdf.mean == 0.0 and np.all(curve.phi == 0.0)


def test_direct_histogram_matches_density(linear):
    _, curve = fpt_direct_mc(linear, 2.0, 1000, 30_000, seed=3)
    exact = np.diff(linear_boundary_cdf(np.linspace(0, 2, 51)[1:], 1.0, 1.0), prepend=0.0) / 0.04
    # binned truth; tolerance is the per-bin 95% band widened to ~4 sigma
    half = (curve.ci_high - curve.phi) * 2.1 + 1e-3
    assert np.all(np.abs(curve.phi - exact) <= half)


def test_direct_histogram_mass_equals_cdf(quadratic):
    cdf, curve = fpt_direct_mc(quadratic, 1.5, 200, 4000, seed=4)
    assert np.sum(curve.phi) * (1.5 / 50) == pytest.approx(cdf.mean, abs=1e-12)


def test_direct_rejects_coarse_grid(linear):
    with pytest.raises(ConfigError):
        fpt_direct_mc(linear, 1.0, 50, 100)


def test_passage_times_finite_before_horizon(quadratic):
    tau = passage_times(quadratic, 1.0, 200, 3000, seed=5)
    hit = np.isfinite(tau)
    assert np.all((tau[hit] > 0) & (tau[hit] <= 1.0))


def test_direct_reproducible_and_thread_invariant(quadratic, monkeypatch):
    monkeypatch.setenv("FPT_THREADS", "1")
    one = passage_times(quadratic, 1.0, 200, 5000, seed=6)
    monkeypatch.setenv("FPT_THREADS", "3")
    three = passage_times(quadratic, 1.0, 200, 5000, seed=6)
    assert one.tobytes() == three.tobytes()


# -- Girsanov / bridge estimator ---------------------------------------------------------


def test_girsanov_linear_exact(linear):
    est = fpt_density_girsanov(linear, 1.0, seed=0)
    assert est.mean == pytest.approx(G.LINEAR_DENSITY_1, rel=1e-12)
    assert est.std_error == 0.0


@pytest.mark.parametrize("s", [0.3, 1.0, 4.0])
def test_girsanov_constant_is_level_density(flat, s):
    assert fpt_density_girsanov(flat, s).mean == pytest.approx(level_hitting_density(s, 1.0), rel=1e-14)


def test_girsanov_quadratic_golden(quadratic):
    est = fpt_density_girsanov(quadratic, 1.0, 400, 40_000, seed=21)
    tol = 3 * np.hypot(est.std_error, G.QUAD_PHI_SE[1.0])
    assert abs(est.mean - G.QUAD_PHI[1.0]) < tol
    env = theorem_envelope(quadratic, [1.0])
    assert env.lower[0] < est.mean < env.upper[0]


def test_step_doubling_within_noise(quadratic):
    coarse = fpt_density_girsanov(quadratic, 1.0, 200, 40_000, seed=22)
    fine = fpt_density_girsanov(quadratic, 1.0, 400, 40_000, seed=23)
    assert abs(coarse.mean - fine.mean) < 3 * np.hypot(coarse.std_error, fine.std_error)


@given(b=st.floats(-1.0, 1.0), c=st.floats(0.0, 1.0), s=st.floats(0.2, 2.0))
def test_girsanov_below_upper_bound(b, c, s):
    bnd = make_boundary("quadratic", 1.0, [b, c])
    est = fpt_density_girsanov(bnd, s, 20, 200, seed=0)
    assert 0.0 < est.mean <= girsanov_prefactor(bnd, s) * (1 + 1e-15)


def test_girsanov_curve_integrates_to_direct_cdf(quadratic):
    # Gauss-Legendre on (0, 1]; the integrand is negligible below s = 0.05
    x, w = np.polynomial.legendre.leggauss(12)
    s = 0.5 * (x + 1.0)
    curve = girsanov_curve(quadratic, s, 200, 8000, seed=31)
    se = (curve.ci_high - curve.phi) / 1.959963984540054
    total = 0.5 * np.dot(w, curve.phi)
    total_se = 0.5 * np.sqrt(np.dot(w**2, se**2))
    cdf, _ = fpt_direct_mc(quadratic, 1.0, 1000, 40_000, seed=32)
    assert abs(total - cdf.mean) < 3 * np.hypot(total_se, cdf.std_error) + 0.005


def test_girsanov_domain(quadratic):
    with pytest.raises(DomainError):
        fpt_density_girsanov(quadratic, 0.0)


def test_girsanov_thread_invariant(quadratic, monkeypatch):
    monkeypatch.setenv("FPT_THREADS", "1")
    one = fpt_density_girsanov(quadratic, 1.0, 50, 6000, seed=7)
    monkeypatch.setenv("FPT_THREADS", "2")
    two = fpt_density_girsanov(quadratic, 1.0, 50, 6000, seed=7)
    assert one == two


# -- martingale --------------------------------------------------------------------


@pytest.mark.parametrize("name", ["linear", "quadratic"])
def test_martingale_mean_one(name, request):
    est = martingale_check(request.getfixturevalue(name), 1.0, 500, 20_000, seed=8)
    assert est.within(1.0)


def test_martingale_constant_exact(flat):
    est = martingale_check(flat, 2.0, 100, 1000)
    assert est.mean == 1.0 and est.std_error == 0.0


# -- data types ----------------------------------------------------------------------


def test_estimate_ci():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    est = EstimateCI.from_samples(x)
    assert est.mean == 2.5 and est.n == 4
    assert est.std_error == pytest.approx(np.std(x, ddof=1) / 2)


def test_curve_csv_schema(tmp_path):
    curve = DensityCurve([0.5, 1.0], [0.2, 0.1], "girsanov_mc", "abc", ci_low=[0.19, 0.09], ci_high=[0.21, 0.11])
    text = curve.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["s", "phi", "ci_low", "ci_high", "method"]
    assert rows[1] == ["0.5", "0.2", "0.19", "0.21", "girsanov_mc"]
    path = tmp_path / "c.csv"
    path.write_text(text)
    s, phi = read_curve_csv(path)
    np.testing.assert_array_equal(phi, [0.2, 0.1])
    doc = json.loads(curve.to_json())
    assert doc["schema_version"] == 1 and doc["rows"][1]["ci_high"] == 0.11


def test_curve_csv_nine_digits():
    text = DensityCurve([1.0], [1 / 3], "closed_form").to_csv()
    assert text.splitlines()[1] == "1,0.333333333,,,closed_form"


def test_curve_rejects_unknown_method():
    with pytest.raises(ConfigError):
        DensityCurve([1.0], [0.1], "guess")


def test_girsanov_curve_ci_ordered(quadratic):
    c = girsanov_curve(quadratic, [0.5, 1.0], 50, 3000, seed=0)
    assert np.all(c.ci_low <= c.phi) and np.all(c.phi <= c.ci_high) and np.all(c.phi >= 0)
