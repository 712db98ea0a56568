"""Monitored qubit: H = -J sigma^x, sigma^z measured at rate gamma.

The level splitting is Omega = 2J and the transfer eigenvalue kernel is
cos(Omega t); its resolvent I(s) is the anti-damped oscillator solution in
:func:`trajdist.volterra.closed_form_qubit_I`.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from ..core import MonitoredSystem
from ..volterra import closed_form_qubit_I

__all__ = [
    "QubitParams",
    "StationaryUndefinedAtZeroRate",
    "qubit_system",
    "qubit_I",
    "qubit_click_density",
    "qubit_second_moment",
    "qubit_stationary_density",
    "qubit_stationary_cdf",
    "qubit_stationary_even_moment",
]


class StationaryUndefinedAtZeroRate(ValueError):
    pass


@dataclass(frozen=True)
class QubitParams:
    omega: float
    gamma: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")

    @property
    def J(self):
        return 0.5 * self.omega

    @property
    def big_gamma(self):
        """sqrt(gamma^2 - 4 Omega^2), imaginary in the oscillatory regime."""
        return complex(self.gamma**2 - 4 * self.omega**2) ** 0.5

    @property
    def regime(self):
        if abs(self.gamma - 2 * self.omega) < 1e-8 * self.omega:
            return "critical"
        return "oscillatory" if self.gamma < 2 * self.omega else "overdamped"


def qubit_system(params):
    """Two-level MonitoredSystem starting in |+1>, observable sigma^z."""
    h = -params.J * np.array([[0.0, 1.0], [1.0, 0.0]])
    return MonitoredSystem(h, [1.0, -1.0], params.gamma, 0, label="qubit")


def qubit_I(params, s):
    return closed_form_qubit_I(params.gamma, params.omega, s)


def _poles(params, t, x):
    """Times s in [0, t] with sigma cos(Omega (t - s)) = x, per sign sigma."""
    om = params.omega
    kmax = int(math.floor(om * t / (2 * math.pi))) + 2
    ks = np.arange(-kmax, kmax + 1)
    for sigma in (1.0, -1.0):
        a = np.arccos(np.clip(sigma * x, -1.0, 1.0))
        for sign in (1.0, -1.0):
            s = t + sign * a[..., None] / om + 2 * np.pi * ks / om
            yield sigma, s


def qubit_click_density(params, t, x):
    r"""Continuous part of the sigma^z distribution after at least one click.

    Sums the delta poles :math:`\tilde s_k = t \pm \arccos(\sigma x)/\Omega
    + 2\pi k/\Omega` that fall in ``[0, t]``; each contributes
    :math:`\gamma e^{-\gamma t}[e^{\gamma s} + \sigma I(s)] / (2\Omega\sqrt{1-x^2})`.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= 1 - 1e-9):
        raise ValueError("density requires |x| < 1 - 1e-9")
    g, om = params.gamma, params.omega
    total = np.zeros(x.shape)
    for sigma, s in _poles(params, t, x):
        inside = (s >= 0) & (s <= t)
        sc = np.where(inside, s, 0.0)
        # e^{-gamma t} folded in to keep large-t values finite
        term = np.exp(g * (sc - t)) + sigma * np.exp(-g * t) * qubit_I(params, sc)
        total += np.sum(np.where(inside, term, 0.0), axis=-1)
    return g * total / (2 * om * np.sqrt(1 - x * x))


def qubit_second_moment(params, t):
    r"""Second moment of the sigma^z distribution.

    Exact antiderivative of
    :math:`e^{-\gamma t}\int_0^t \gamma\cos^2(\Omega(t-s))e^{\gamma s}ds
    + e^{-\gamma t}\cos^2(\Omega t)`.
    """
    t = np.asarray(t, dtype=float)
    g, om = params.gamma, params.omega
    c = complex(g, -2 * om)
    # int_0^t gamma cos^2(Omega u) e^{-gamma u} du
    flat = -0.5 * np.expm1(-g * t)
    osc = 0.5 * g * (-np.expm1(-c * t) / c).real
    return flat + osc + np.exp(-g * t) * np.cos(om * t) ** 2


def qubit_stationary_density(params, x):
    r"""Long-time density of sigma^z.

    Written as :math:`\gamma (e^{-ga} + e^{-g(\pi-a)}) / (2\Omega(1-e^{-g\pi})\sqrt{1-x^2})`
    with ``g = gamma/Omega`` and ``a = arccos x``, which equals the usual
    ``[e^{2g arcsin x} + 1] e^{g arccos x} / (e^{g pi} - 1)`` form without
    overflowing at large ``g``.
    """
    g0 = params.gamma
    if g0 == 0:
        raise StationaryUndefinedAtZeroRate("stationary density is undefined at gamma = 0")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= 1 - 1e-9):
        raise ValueError("density requires |x| < 1 - 1e-9")
    om = params.omega
    g = g0 / om
    a = np.arccos(x)
    num = np.exp(-g * a) + np.exp(-g * (np.pi - a))
    return g0 * num / (2 * om * -np.expm1(-g * np.pi) * np.sqrt(1 - x * x))


def qubit_stationary_cdf(params, x):
    """CDF of the stationary law; the density integrates in closed form under x = cos(a)."""
    g0 = params.gamma
    if g0 == 0:
        raise StationaryUndefinedAtZeroRate("stationary density is undefined at gamma = 0")
    x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
    g = g0 / params.omega
    a = np.arccos(x)
    # mass above x is the integral over angles in [0, a]
    up = (-np.expm1(-g * a) + np.exp(-g * (np.pi - a)) - np.exp(-g * np.pi)) / (2 * -np.expm1(-g * np.pi))
    return 1.0 - up


def qubit_stationary_even_moment(params, n):
    r"""Stationary :math:`\langle x^{2n}\rangle = \int_0^\infty e^{-s}\cos^{2n}(s\Omega/\gamma)ds`.

    Evaluated through the terminating Gauss series
    :math:`{}_2F_1(-2n, b; b+1; -1) / (2^{2n}(1 - 2in\Omega/\gamma))` with
    :math:`b = -n - i\gamma/(2\Omega)`; the first parameter ``-2n`` cuts the
    series at ``2n + 1`` terms. The exact result is real; the real part is
    returned.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    g, om = params.gamma, params.omega
    if g == 0:
        raise StationaryUndefinedAtZeroRate("stationary moments are undefined at gamma = 0")
    b = complex(-n, -g / (2 * om))
    m = np.arange(2 * n + 1)
    # (-2n)_m (b)_m / ((b+1)_m m!) (-1)^m = C(2n, m) b / (b + m)
    hyp = np.sum(comb(2 * n, m) * b / (b + m))
    val = hyp / (4.0**n * (1 - 2j * n * om / g))
    return float(val.real)
