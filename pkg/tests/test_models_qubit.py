import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from trajdist.models import (
    QubitParams,
    qubit_click_density,
    qubit_I,
    qubit_second_moment,
    qubit_stationary_cdf,
    qubit_stationary_density,
    qubit_stationary_even_moment,
    qubit_system,
)
from trajdist.models.qubit import StationaryUndefinedAtZeroRate


def _click_integral(params, t, f):
    # substitute x = cos(a) to remove the 1/sqrt(1-x^2) edge singularity
    def g(a):
        x = math.cos(a)
        return f(x) * float(qubit_click_density(params, t, np.array([x]))[0]) * math.sin(a)

    om = params.omega
    # break points where poles cross the integration path
    pts = sorted({(om * t) % (2 * math.pi), (2 * math.pi - om * t) % (2 * math.pi)})
    pts = [p for p in pts if 1e-9 < p < math.pi - 1e-9]
    return quad(g, 1e-10, math.pi - 1e-10, points=pts or None, limit=400, epsabs=1e-11)[0]


def test_params_validation():
    with pytest.raises(ValueError):
        QubitParams(0.0, 1.0)
    with pytest.raises(ValueError):
        QubitParams(1.0, -0.1)


def test_regimes():
    assert QubitParams(1.0, 0.5).regime == "oscillatory"
    assert QubitParams(1.0, 2.0).regime == "critical"
    assert QubitParams(1.0, 5.0).regime == "overdamped"
    assert QubitParams(1.0, 5.0).big_gamma.real == pytest.approx(math.sqrt(21))
    assert QubitParams(1.0, 1.0).big_gamma.imag == pytest.approx(math.sqrt(3))


def test_system_shape():
    s = qubit_system(QubitParams(2.0, 0.3))
    assert np.allclose(s.hamiltonian, [[0, -1], [-1, 0]])
    assert list(s.observable_values) == [1.0, -1.0]
    assert s.rate == 0.3 and s.initial_index == 0


@pytest.mark.parametrize("gamma,t", [(0.2, 5.0), (1.0, 1.3), (2.0, 3.0), (5.0, 2.0), (0.5, 0.4)])
def test_click_density_plus_atom_is_normalized(gamma, t):
    p = QubitParams(1.0, gamma)
    mass = _click_integral(p, t, lambda x: 1.0)
    assert mass + math.exp(-gamma * t) == pytest.approx(1.0, abs=1e-7)


def test_click_density_is_non_negative():
    p = QubitParams(1.0, 0.7)
    x = np.linspace(-0.999, 0.999, 801)
    for t in (0.3, 2.0, 7.5):
        assert np.all(qubit_click_density(p, t, x) >= 0)


def test_click_density_domain():
    with pytest.raises(ValueError):
        qubit_click_density(QubitParams(1.0, 1.0), 1.0, np.array([1.0]))


@pytest.mark.parametrize("gamma,t", [(0.25, 2.0), (1.0, 3.0), (5.0, 1.0), (2.0, 6.0)])
def test_second_moment_against_density(gamma, t):
    p = QubitParams(1.0, gamma)
    click = _click_integral(p, t, lambda x: x * x)
    atom = math.exp(-gamma * t) * math.cos(t) ** 2
    assert qubit_second_moment(p, t) == pytest.approx(click + atom, abs=1e-7)


def test_second_moment_limits():
    p = QubitParams(1.3, 0.8)
    assert qubit_second_moment(p, 0.0) == 1.0
    # gamma = 0: no clicks, cos^2(Omega t)
    free = QubitParams(1.3, 0.0)
    t = np.linspace(0, 5, 11)
    assert np.allclose(qubit_second_moment(free, t), np.cos(1.3 * t) ** 2, atol=1e-15)
    g, om = 0.8, 1.3
    assert qubit_second_moment(p, 60.0) == pytest.approx((g * g + 2 * om * om) / (g * g + 4 * om * om), abs=1e-12)


def test_resolvent_alias():
    p = QubitParams(1.0, 0.5)
    s = np.linspace(0, 3, 5)
    # I(s) = d/ds-free check: I(0) = 1
    assert qubit_I(p, s)[0] == 1.0


def test_stationary_density_normalized_and_even():
    for g in (0.2, 1.0, 5.0):
        p = QubitParams(1.0, g)
        total = quad(lambda a: float(qubit_stationary_density(p, math.cos(a))) * math.sin(a), 1e-9, math.pi - 1e-9)[0]
        assert total == pytest.approx(1.0, abs=1e-7)
        x = np.linspace(-0.99, 0.99, 101)
        assert np.allclose(qubit_stationary_density(p, x), qubit_stationary_density(p, -x), rtol=1e-12)


@settings(max_examples=100)
@given(st.floats(0.01, 20.0), st.floats(0.05, 5.0), st.floats(-0.999, 0.999))
def test_stationary_evenness_property(gamma, omega, x):
    p = QubitParams(omega, gamma)
    a, b = qubit_stationary_density(p, x), qubit_stationary_density(p, -x)
    assert a == pytest.approx(b, rel=1e-10)
    assert qubit_stationary_cdf(p, x) + qubit_stationary_cdf(p, -x) == pytest.approx(1.0, abs=1e-12)


def test_stationary_cdf_matches_density():
    p = QubitParams(1.0, 0.6)
    for x in (-0.8, -0.1, 0.3, 0.95):
        area = quad(lambda a: float(qubit_stationary_density(p, math.cos(a))) * math.sin(a), math.acos(x), math.pi)[0]
        assert qubit_stationary_cdf(p, x) == pytest.approx(area, abs=1e-9)
    assert qubit_stationary_cdf(p, -1.0) == pytest.approx(0.0, abs=1e-15)
    assert qubit_stationary_cdf(p, 1.0) == pytest.approx(1.0, abs=1e-15)


def test_stationary_density_large_rate_is_finite():
    p = QubitParams(1.0, 500.0)
    x = np.array([-0.9, 0.0, 0.9])
    assert np.all(np.isfinite(qubit_stationary_density(p, x)))


@pytest.mark.parametrize("gamma", [0.3, 1.0, 4.0])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_stationary_even_moment_by_quadrature(gamma, n):
    p = QubitParams(1.0, gamma)
    # int_0^inf e^{-s} cos^{2n}(s Omega / gamma) ds
    val = quad(lambda s: math.exp(-s) * math.cos(s / gamma) ** (2 * n), 0, np.inf, limit=2000)[0]
    assert qubit_stationary_even_moment(p, n) == pytest.approx(val, abs=1e-9)
    dens = quad(lambda a: math.cos(a) ** (2 * n) * float(qubit_stationary_density(p, math.cos(a))) * math.sin(a), 1e-9, math.pi - 1e-9)[0]
    assert qubit_stationary_even_moment(p, n) == pytest.approx(dens, abs=1e-7)


def test_stationary_second_moment_closed():
    g, om = 0.8, 1.3
    assert qubit_stationary_even_moment(QubitParams(om, g), 1) == pytest.approx(
        (g * g + 2 * om * om) / (g * g + 4 * om * om), abs=1e-13
    )


def test_stationary_undefined_at_zero_rate():
    p = QubitParams(1.0, 0.0)
    for fn in (lambda: qubit_stationary_density(p, 0.1), lambda: qubit_stationary_cdf(p, 0.1), lambda: qubit_stationary_even_moment(p, 1)):
        with pytest.raises(StationaryUndefinedAtZeroRate):
            fn()
    with pytest.raises(ValueError):
        qubit_stationary_even_moment(QubitParams(1.0, 1.0), 0)


def test_worked_qubit_values():
    p = QubitParams(1.0, 1.0)
    # after a click the value is +-cos(Omega u) with u <= t, so |x| < cos(Omega t) is unreachable
    assert np.all(qubit_click_density(p, 0.5, np.array([-0.5, 0.0, 0.5])) == 0.0)
    assert qubit_click_density(p, 0.5, np.array([0.95]))[0] > 0
    g = lambda s: math.exp(-2.0) * math.exp(s) * math.cos(2.0 - s) ** 2
    ref = quad(g, 0, 2.0, epsabs=1e-14)[0] + math.exp(-2.0) * math.cos(2.0) ** 2
    assert qubit_second_moment(p, 2.0) == pytest.approx(ref, abs=1e-10)
    assert qubit_stationary_even_moment(QubitParams(1.0, 2.0), 1) == pytest.approx(0.75, abs=1e-8)
    assert qubit_stationary_density(QubitParams(1.0, 0.7), 0.3) == pytest.approx(qubit_stationary_density(QubitParams(1.0, 0.7), -0.3), rel=1e-12)
    big = QubitParams(1.0, 1e6)
    for n in range(1, 5):
        assert qubit_stationary_even_moment(big, n) == pytest.approx(1.0, abs=1e-10)
    mass = _click_integral(QubitParams(1.0, 0.5), 4.0, lambda x: 1.0)
    assert mass + math.exp(-2.0) == pytest.approx(1.0, abs=1e-6)
