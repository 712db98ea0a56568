import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajdist.models import (
    HoppingParams,
    dispersion,
    hopping_click_mass,
    hopping_Ik,
    hopping_qm_moment,
    hopping_second_moment,
    hopping_site_density,
    hopping_system,
    ring_size,
)
from trajdist.special import bessel_J
from trajdist.volterra import ConvolutionKernel, solve_volterra


def _second_moment_ref(g, om, t):
    return 4 * om**2 / g**2 * ((g * t - 2) + math.exp(-g * t) * (g * t + 2))


def test_params_and_ring():
    with pytest.raises(ValueError):
        HoppingParams(0.0, 1.0)
    with pytest.raises(ValueError):
        HoppingParams(1.0, -1.0)
    p = HoppingParams(1.0, 1.0)
    n = ring_size(p, 10.0)
    assert n % 2 == 1 and n >= 81
    with pytest.raises(ValueError):
        hopping_system(p, 8)
    s = hopping_system(p, 9)
    assert s.observable_values[s.initial_index] == 0.0
    assert list(s.observable_values) == list(range(-4, 5))
    assert s.hamiltonian[0, 8] == -1.0


def test_dispersion():
    p = HoppingParams(0.5, 1.0)
    assert dispersion(p, math.pi) == pytest.approx(2.0)
    assert dispersion(p, 0.0) == 0.0


@pytest.mark.parametrize("k", [math.pi / 4, math.pi / 2, math.pi])
def test_Ik_matches_numeric_volterra(k):
    p = HoppingParams(1.0, 1.0)
    sol = solve_volterra(ConvolutionKernel.bessel_j0(float(dispersion(p, k))), 1.0, 3.0, 1e-3)
    series = hopping_Ik(p, k, sol.times)
    assert np.max(np.abs(series - sol.values.real)) < 1e-5


def test_Ik_limits():
    p = HoppingParams(1.0, 0.7)
    s = np.linspace(0, 4, 9)
    # k = 0: the kernel is 1 and I = e^{gamma s}
    assert np.allclose(hopping_Ik(p, 0.0, s), np.exp(0.7 * s), rtol=1e-13)
    free = HoppingParams(1.0, 0.0)
    assert np.allclose(hopping_Ik(free, 1.1, s), bessel_J(0, dispersion(free, 1.1) * s), atol=1e-15)


def test_Ik_large_gamma_s():
    p = HoppingParams(1.0, 5.0)
    s = np.array([10.0])
    v = hopping_Ik(p, math.pi / 3, s)
    k = ConvolutionKernel.bessel_j0(float(dispersion(p, math.pi / 3)))
    a = solve_volterra(k, 5.0, 10.0, 1e-3).values[-1].real
    b = solve_volterra(k, 5.0, 10.0, 5e-4).values[-1].real
    assert v[0] == pytest.approx((4 * b - a) / 3, rel=1e-6)


@pytest.mark.parametrize("gamma,t", [(1.0, 2.0), (0.25, 4.0), (5.0, 1.0)])
def test_masses_normalize_with_no_click_atom(gamma, t):
    p = HoppingParams(1.0, gamma)
    j = np.arange(-40, 41)
    click = hopping_click_mass(p, j, t)
    assert click.sum() + math.exp(-gamma * t) == pytest.approx(1.0, abs=1e-9)
    assert np.all(click >= -1e-12)


@settings(max_examples=30)
@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.integers(0, 15))
def test_mass_parity(gamma, t, j):
    p = HoppingParams(1.0, gamma)
    m = hopping_click_mass(p, np.array([j, -j]), t)
    assert m[0] == pytest.approx(m[1], abs=1e-14)


@pytest.mark.parametrize("t", [0.5, 2.0, 5.0])
def test_second_moment_from_masses(t):
    p = HoppingParams(1.0, 1.0)
    j = np.arange(-60, 61)
    m2 = float(np.sum(j * j * hopping_click_mass(p, j, t)))
    assert m2 == pytest.approx(_second_moment_ref(1.0, 1.0, t), abs=1e-6)
    assert hopping_second_moment(p, t) == pytest.approx(_second_moment_ref(1.0, 1.0, t), rel=1e-13)


def test_second_moment_small_and_large_time():
    p = HoppingParams(1.3, 2.0)
    t = np.array([1e-4, 1e-3, 0.049])
    m = hopping_second_moment(p, t)
    lead = 2 / 3 * 2.0 * 1.3**2 * t**3
    assert np.allclose(m / lead, 1 - 2.0 * t / 2, rtol=2e-3)  # next order: -gamma t / 2
    # both branches agree where they meet
    lo, hi = hopping_second_moment(p, np.array([0.05 - 1e-12, 0.05 + 1e-12]))
    assert lo == pytest.approx(hi, rel=1e-9)
    # diffusive regime: 4 Omega^2 t / gamma
    big = hopping_second_moment(p, 500.0)
    assert big == pytest.approx(4 * 1.3**2 / 2.0 * (500.0 - 2 / 2.0), rel=1e-12)


def test_site_density_free_is_bessel():
    p = HoppingParams(1.0, 0.0)
    j = np.arange(-10, 11)
    n = hopping_site_density(p, j, 1.5)
    assert np.allclose(n, [float(bessel_J(int(i), 3.0)) ** 2 for i in j], atol=1e-13)


def test_site_density_normalized():
    p = HoppingParams(1.0, 2.0)
    j = np.arange(-60, 61)
    assert hopping_site_density(p, j, 5.0).sum() == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("gamma", [0.0, 0.5, 3.0])
def test_qm_second_moment(gamma):
    # averaged-state spreading: (4 Omega^2/gamma)[t - (1 - e^{-gamma t})/gamma], 2 Omega^2 t^2 at gamma = 0
    p = HoppingParams(1.0, gamma)
    t = 2.5
    ref = 2 * t * t if gamma == 0 else 4 / gamma * (t - (1 - math.exp(-gamma * t)) / gamma)
    assert hopping_qm_moment(p, 2, t) == pytest.approx(ref, rel=1e-6)
    assert hopping_qm_moment(p, 1, t) == 0.0
    assert hopping_qm_moment(p, 0, t) == 1.0


def test_qm_fourth_moment_against_sites():
    p = HoppingParams(1.0, 1.0)
    j = np.arange(-50, 51)
    n = hopping_site_density(p, j, 3.0)
    assert hopping_qm_moment(p, 4, 3.0) == pytest.approx(float(np.sum(j**4 * n)), rel=1e-5)
    with pytest.raises(ValueError):
        hopping_qm_moment(p, -1, 1.0)


def test_worked_hopping_values():
    p = HoppingParams(1.0, 1.0)
    assert hopping_second_moment(p, 2.0) == pytest.approx(16 * math.exp(-2), rel=1e-14)
    slope = (hopping_second_moment(p, 50.0) - hopping_second_moment(p, 40.0)) / 10
    assert slope == pytest.approx(4.0, abs=1e-3)
    assert hopping_qm_moment(p, 2, 2.0) == pytest.approx(4 + 4 * math.exp(-2), abs=1e-5)
    assert hopping_qm_moment(HoppingParams(1.0, 1e-4), 2, 1.0) == pytest.approx(2.0, rel=1e-3)
    j = np.arange(-30, 31)
    assert hopping_click_mass(p, j, 2.0).sum() == pytest.approx(1 - math.exp(-2), abs=1e-4)
    k = ConvolutionKernel.bessel_j0(4.0)
    assert hopping_Ik(p, math.pi, np.array([1.0]))[0] == pytest.approx(solve_volterra(k, 1.0, 1.0, 1e-3).values[-1].real, abs=1e-6)
