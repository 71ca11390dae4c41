import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

import golden as G
from fptcross.errors import DomainError
from fptcross.kernels import (
    BridgeSpec,
    absorbed_density,
    bridge_marginal_cdf,
    bridge_mean,
    bridge_transition,
    heat_kernel,
    level_hitting_cdf,
    level_hitting_density,
    linear_boundary_cdf,
    linear_boundary_density,
)


def test_level_hitting_examples():
    assert level_hitting_density(1.0, 1.0) == pytest.approx(G.H_1_1, rel=1e-13)
    assert level_hitting_density(1.0, 2.0) == pytest.approx(G.H_1_2, rel=1e-13)
    assert level_hitting_density(1.0, -1.0) == level_hitting_density(1.0, 1.0)


@pytest.mark.parametrize("s,a", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
def test_level_hitting_domain(s, a):
    with pytest.raises(DomainError):
        level_hitting_density(s, a)


def test_level_hitting_cdf_examples():
    assert level_hitting_cdf(1.0, 1.0) == pytest.approx(G.LEVEL_CDF_1_1, rel=1e-13)
    assert level_hitting_cdf(1e12, 1.0) == pytest.approx(1.0, abs=1e-5)
    assert level_hitting_cdf(1e-4, 1.0) < 1e-12
    with pytest.raises(DomainError):
        level_hitting_cdf(1.0, -1.0)


def test_heat_kernel_examples():
    assert heat_kernel(1.0, 0.0) == pytest.approx(G.K_1_0, rel=1e-14)
    assert heat_kernel(2.0, 1.0) == pytest.approx(G.K_2_1, rel=1e-14)
    with pytest.raises(DomainError):
        heat_kernel(0.0, 1.0)


def test_absorbed_examples():
    assert absorbed_density(1.0, 0.0, 0.0, 1.0) == pytest.approx(G.ABSORBED_1_0_0_1, rel=1e-13)
    assert absorbed_density(1.0, 0.0, 1.0 - 1e-12, 1.0) < 1e-11
    assert absorbed_density(1.0, 0.0, 0.0, 10.0) == pytest.approx(heat_kernel(1.0, 0.0), abs=1e-12)
    with pytest.raises(DomainError):
        absorbed_density(1.0, 1.5, 0.0, 1.0)


@given(sigma=st.floats(0.05, 20.0), kappa=st.floats(-5.0, 5.0))
def test_heat_kernel_even_and_normalized(sigma, kappa):
    assert heat_kernel(sigma, kappa) == heat_kernel(sigma, -kappa)
    total, _ = integrate.quad(lambda z: heat_kernel(sigma, z), -np.inf, np.inf, epsabs=1e-12)
    assert total == pytest.approx(1.0, abs=1e-8)


@given(a=st.floats(0.2, 3.0), t=st.floats(0.05, 5.0))
def test_level_density_integrates_to_cdf(a, t):
    part, _ = integrate.quad(lambda s: level_hitting_density(s, a), 0.0, t, epsabs=1e-13, epsrel=1e-12)
    assert part == pytest.approx(level_hitting_cdf(t, a), abs=1e-8)
    tail, _ = integrate.quad(lambda s: level_hitting_density(s, a), t, np.inf, epsabs=1e-13, epsrel=1e-12)
    assert part + tail == pytest.approx(1.0, abs=1e-8)


@given(t=st.floats(0.1, 3.0), x=st.floats(-2.0, 0.9))
def test_absorbed_mass_is_survival(t, x):
    a = 1.0
    mass, _ = integrate.quad(lambda y: absorbed_density(t, x, y, a), -np.inf, a, epsabs=1e-13)
    assert mass == pytest.approx(1.0 - level_hitting_cdf(t, a - x), abs=1e-8)


# -- bridge transition ----------------------------------------------------------


def test_transition_examples():
    spec = BridgeSpec(1.0, 1.0)
    assert bridge_transition(spec, 0.0, 1.0, 0.5, 0.0) == 0.0
    assert bridge_transition(spec, 0.0, 1.0, 0.5, 1.0) == pytest.approx(G.G_S1_X1_TAU05_Y1, rel=1e-12)


def test_transition_normalizes():
    spec = BridgeSpec(1.0, 1.0)
    total, _ = integrate.quad(lambda y: bridge_transition(spec, 0.0, 1.0, 0.5, y), 0.0, np.inf, epsabs=1e-13)
    assert total == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("args", [(0.5, 1.0, 0.5, 1.0), (0.0, 1.0, 1.0, 1.0), (0.0, 0.0, 0.5, 1.0), (0.0, 1.0, 0.5, -1.0)])
def test_transition_domain(args):
    with pytest.raises(DomainError):
        bridge_transition(BridgeSpec(1.0, 1.0), *args)


@pytest.mark.parametrize("x", [0.3, 1.0, 2.0])
def test_chapman_kolmogorov(x):
    spec = BridgeSpec(1.0, 2.0)
    t, r, tau = 0.2, 0.9, 1.5
    for y in (0.4, 1.0, 1.8):
        lhs, _ = integrate.quad(
            lambda z: bridge_transition(spec, t, x, r, z) * bridge_transition(spec, r, z, tau, y),
            0.0, 20.0, epsabs=1e-12, epsrel=1e-11, limit=200,
        )
        assert lhs == pytest.approx(bridge_transition(spec, t, x, tau, y), abs=1e-6)


@given(x=st.floats(0.05, 3.0), tau=st.floats(0.05, 0.95))
def test_transition_normalizes_everywhere(x, tau):
    spec = BridgeSpec(x, 1.0)
    total, _ = integrate.quad(lambda y: bridge_transition(spec, 0.0, x, tau, y), 0.0, np.inf, epsabs=1e-12, limit=200)
    assert total == pytest.approx(1.0, abs=1e-7)


# -- bridge mean ----------------------------------------------------------------


def test_bridge_mean_examples():
    assert bridge_mean(BridgeSpec(0.0, 1.0), 0.5) == pytest.approx(G.BRIDGE_MEAN_A0_HALF, rel=1e-14)
    assert bridge_mean(BridgeSpec(0.0, 1.0), 1e-12) < 1e-5
    assert bridge_mean(BridgeSpec(1.0, 1.0), 1e-6) == pytest.approx(1.0, abs=1e-5)
    assert bridge_mean(BridgeSpec(1.0, 1.0), 0.5) == pytest.approx(G.BRIDGE_MEAN_A1_HALF, rel=1e-10)


@given(u=st.floats(0.001, 0.999), s=st.floats(0.1, 4.0))
def test_bridge_mean_symmetric_at_zero_start(u, s):
    spec = BridgeSpec(0.0, s)
    assert bridge_mean(spec, u * s) == pytest.approx(bridge_mean(spec, (1 - u) * s), rel=1e-12, abs=1e-15)


def test_small_start_approaches_closed_form():
    assert bridge_mean(BridgeSpec(1e-4, 1.0), 0.5) == pytest.approx(G.BRIDGE_MEAN_A0_HALF, rel=1e-4)


def test_marginal_cdf_endpoints():
    cdf = bridge_marginal_cdf(BridgeSpec(1.0, 1.0), 0.5)
    assert cdf(0.0) == 0.0
    assert cdf(50.0) == 1.0
    grid = np.linspace(0, 4, 200)
    assert np.all(np.diff(cdf(grid)) >= 0)
    maxwell = bridge_marginal_cdf(BridgeSpec(0.0, 1.0), 0.5)
    assert maxwell(1e3) == pytest.approx(1.0)


# -- linear boundary closed forms --------------------------------------------------


def test_linear_closed_forms():
    assert linear_boundary_cdf(1.0, 1.0, 1.0) == pytest.approx(G.LINEAR_CDF_1, rel=1e-13)
    assert linear_boundary_density(1.0, 1.0, 1.0) == pytest.approx(G.LINEAR_DENSITY_1, rel=1e-13)


@given(a=st.floats(0.3, 2.0), b=st.floats(-1.0, 2.0), t=st.floats(0.1, 4.0))
def test_linear_density_integrates_to_cdf(a, b, t):
    part, _ = integrate.quad(lambda s: linear_boundary_density(s, a, b), 0.0, t, epsabs=1e-13, epsrel=1e-12)
    assert part == pytest.approx(linear_boundary_cdf(t, a, b), abs=1e-9)


def test_bridge_spec_validation():
    with pytest.raises(DomainError):
        BridgeSpec(-1.0, 1.0)
    with pytest.raises(DomainError):
        BridgeSpec(1.0, 0.0)
    assert BridgeSpec(0.0, 1.0).std(0.5) == pytest.approx(0.5)
    assert math.isclose(BridgeSpec(0.0, 2.0).std(1.0), math.sqrt(0.5))
