import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

import golden as G
from fptcross.bridge import (
    functional_values,
    path_integrals,
    sample,
    sample_sde,
    sample_three_bridge,
    stream_functional,
)
from fptcross.errors import ConfigError
from fptcross.kernels import BridgeSpec, bridge_marginal_cdf, bridge_mean


@pytest.fixture(scope="module")
def exact_batch():
    return sample_three_bridge(BridgeSpec(1.0, 1.0), 1000, 10_000, seed=3)


@pytest.fixture(scope="module")
def euler_batch():
    return sample_sde(BridgeSpec(1.0, 1.0), 1000, 10_000, seed=4)


def test_sde_endpoints():
    b = sample_sde(BridgeSpec(1.0, 1.0), 1000, 1, seed=42)
    assert b.values.shape == (1, 1001)
    assert b.values[0, 0] == 1.0 and b.values[0, -1] == 0.0
    assert b.dt == pytest.approx(1e-3)


@pytest.mark.parametrize("scheme", ["sde_euler", "three_bridge"])
def test_paths_positive_inside(scheme):
    b = sample(BridgeSpec(0.5, 2.0), 200, 500, seed=1, scheme=scheme)
    assert np.all(b.values[:, 0] == 0.5) and np.all(b.values[:, -1] == 0.0)
    assert np.all(b.values[:, 1:-1] > 0.0)
    assert not b.touched_zero.any()


def test_pinning_collapse(euler_batch, exact_batch):
    # the exact mean at u = 0.999 is 0.0504, a shade above 0.05
    target = bridge_mean(exact_batch.spec, 0.999)
    col = exact_batch.marginal(0.999)
    assert abs(col.mean() - target) < 3 * col.std(ddof=1) / np.sqrt(col.size)
    assert euler_batch.marginal(0.999).mean() < 0.1 * euler_batch.marginal(0.5).mean()


def test_euler_end_bias_shrinks_with_steps():
    target = bridge_mean(BridgeSpec(1.0, 1.0), 0.999)
    errs = [abs(sample_sde(BridgeSpec(1.0, 1.0), n, 4000, seed=4).marginal(0.999).mean() - target) for n in (1000, 4000)]
    assert errs[1] < 0.5 * errs[0]


def test_euler_from_near_zero_matches_closed_form_mean():
    col = sample_sde(BridgeSpec(0.001, 1.0), 1000, 10_000, seed=5).marginal(0.5)
    se = col.std(ddof=1) / np.sqrt(col.size)
    assert abs(col.mean() - G.BRIDGE_MEAN_A0_HALF) < 3 * se


def test_exact_from_zero_matches_closed_form_mean():
    col = sample_three_bridge(BridgeSpec(0.0, 1.0), 100, 20_000, seed=6).marginal(0.5)
    se = col.std(ddof=1) / np.sqrt(col.size)
    assert abs(col.mean() - G.BRIDGE_MEAN_A0_HALF) < 3 * se


def test_exact_marginal_one_sample_ks(exact_batch):
    spec = exact_batch.spec
    res = stats.kstest(exact_batch.marginal(0.5), bridge_marginal_cdf(spec, 0.5))
    crit = stats.kstwo.ppf(0.99, exact_batch.n_paths)
    assert res.statistic < crit


@pytest.mark.parametrize("u", [0.25, 0.5, 0.75])
def test_schemes_agree_in_law(exact_batch, euler_batch, u):
    assert stats.ks_2samp(exact_batch.marginal(u), euler_batch.marginal(u)).pvalue > 0.01


@pytest.mark.parametrize("u", [0.25, 0.5, 0.75])
def test_marginal_means_against_quadrature(exact_batch, u):
    col = exact_batch.marginal(u)
    se = col.std(ddof=1) / np.sqrt(col.size)
    assert abs(col.mean() - bridge_mean(exact_batch.spec, u)) < 3.5 * se


# -- functional ----------------------------------------------------------------


def test_flat_curvature_functional_is_one(linear, exact_batch):
    assert np.all(functional_values(exact_batch, linear) == 1.0)


def test_functional_range(quadratic, euler_batch):
    vals = functional_values(euler_batch, quadratic)
    assert np.all(vals > 0.0) and np.all(vals <= 1.0)


def test_path_integral_mean_from_zero(quadratic):
    batch = sample_three_bridge(BridgeSpec(0.0, 1.0), 400, 20_000, seed=7)
    ints = path_integrals(batch.values, quadratic, 1.0)
    se = ints.std(ddof=1) / np.sqrt(ints.size)
    assert abs(ints.mean() - G.SMALL_GAP_EXPONENT) < 3 * se + 2e-3


def test_functional_golden_from_zero(quadratic):
    vals = stream_functional(quadratic, BridgeSpec(0.0, 1.0), 400, 40_000, seed=11)
    se = vals.std(ddof=1) / np.sqrt(vals.size)
    assert abs(vals.mean() - G.QUAD_A0_FUNCTIONAL) < 3 * np.hypot(se, G.QUAD_A0_FUNCTIONAL_SE)


def test_functional_schemes_overlap(quadratic):
    spec = BridgeSpec(1.0, 1.0)
    est = []
    for scheme, seed in (("three_bridge", 1), ("sde_euler", 2)):
        v = stream_functional(quadratic, spec, 500, 20_000, seed, scheme)
        est.append((v.mean(), v.std(ddof=1) / np.sqrt(v.size)))
    (m1, s1), (m2, s2) = est
    assert abs(m1 - m2) < 3 * (s1 + s2)


def test_stream_matches_batch(quadratic):
    spec = BridgeSpec(1.0, 1.0)
    batch = sample_three_bridge(spec, 50, 3000, seed=9)
    np.testing.assert_array_equal(functional_values(batch, quadratic), stream_functional(quadratic, spec, 50, 3000, 9))


# -- determinism -----------------------------------------------------------------


@pytest.mark.parametrize("scheme", ["sde_euler", "three_bridge"])
def test_bitwise_reproducible(scheme):
    a = sample(BridgeSpec(1.0, 1.0), 50, 3000, seed=12, scheme=scheme)
    b = sample(BridgeSpec(1.0, 1.0), 50, 3000, seed=12, scheme=scheme)
    assert a.values.tobytes() == b.values.tobytes()


def test_thread_count_does_not_change_output(monkeypatch):
    monkeypatch.setenv("FPT_THREADS", "1")
    one = sample_three_bridge(BridgeSpec(1.0, 1.0), 50, 5000, seed=13).values
    monkeypatch.setenv("FPT_THREADS", "4")
    four = sample_three_bridge(BridgeSpec(1.0, 1.0), 50, 5000, seed=13).values
    assert one.tobytes() == four.tobytes()


@given(n=st.integers(1, 5000), seed=st.integers(0, 2**32))
def test_prefix_stable_across_batch_sizes(n, seed):
    spec = BridgeSpec(1.0, 1.0)
    small = sample_three_bridge(spec, 10, min(n, 2048), seed).values
    big = sample_three_bridge(spec, 10, n, seed).values
    np.testing.assert_array_equal(big[: small.shape[0]], small)


def test_seed_changes_output():
    a = sample_three_bridge(BridgeSpec(1.0, 1.0), 20, 10, seed=0).values
    b = sample_three_bridge(BridgeSpec(1.0, 1.0), 20, 10, seed=1).values
    assert not np.array_equal(a, b)


# -- validation and I/O -------------------------------------------------------------


@pytest.mark.parametrize("kw", [dict(n_steps=5, n_paths=10), dict(n_steps=100, n_paths=0)])
def test_rejects_bad_sizes(kw):
    with pytest.raises(ConfigError):
        sample_sde(BridgeSpec(1.0, 1.0), seed=0, **kw)


def test_unknown_scheme():
    with pytest.raises(ConfigError):
        sample(BridgeSpec(1.0, 1.0), 20, 10, scheme="milstein")


def test_csv_dump(tmp_path):
    batch = sample_three_bridge(BridgeSpec(1.0, 1.0), 10, 3, seed=0)
    path = tmp_path / "paths.csv"
    batch.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["path_id", "t", "x"]
    assert len(rows) == 1 + 3 * 11
    assert rows[1] == ["0", "0", "1"] and rows[11][1:] == ["1", "0"]
