"""Monitored hopping particle on an infinite chain.

Position is measured at rate gamma. Free amplitudes are Bessel functions,
so the transfer matrix ``J_{i-j}(2 Omega t)^2`` is circulant and its
eigenvalues are ``J0(omega_k t)`` with ``omega_k = 4 Omega sin(k/2)``.
Everything here works directly in the infinite-chain limit: k-integrals
use the periodic trapezoid rule and s-integrals Gauss-Legendre nodes.
:func:`hopping_system` builds the finite-ring counterpart used by the
generic engines.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..core import MonitoredSystem
from ..special import normalized_bessel_sequence

__all__ = [
    "HoppingParams",
    "NegativeMass",
    "hopping_system",
    "ring_size",
    "dispersion",
    "hopping_Ik",
    "hopping_click_mass",
    "hopping_site_density",
    "hopping_second_moment",
    "hopping_qm_moment",
]


class NegativeMass(ValueError):
    pass


@dataclass(frozen=True)
class HoppingParams:
    omega: float
    gamma: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")

    def j_max_for(self, t):
        """Half-width beyond which free Bessel weights are below ~1e-12."""
        return int(math.ceil(2 * self.omega * t)) + 20


def ring_size(params, t, margin=40):
    """Odd ring length covering the light cone 2*Omega*t on both sides."""
    size = int(math.ceil(4 * params.omega * t)) + margin
    return size + 1 - size % 2


def hopping_system(params, size):
    """Single-particle ring with sites ``-R..R`` (odd ``size = 2R + 1``).

    The particle starts at site 0 and the observable is the position.
    """
    if size < 3 or size % 2 == 0:
        raise ValueError("ring size must be odd and >= 3")
    r = size // 2
    h = np.zeros((size, size))
    idx = np.arange(size)
    h[idx, (idx + 1) % size] = -params.omega
    h[(idx + 1) % size, idx] = -params.omega
    return MonitoredSystem(h, np.arange(-r, r + 1, dtype=float), params.gamma, r, label="hopping")


def dispersion(params, k):
    return 4.0 * params.omega * np.sin(0.5 * np.asarray(k, dtype=float))


def _cutoff(gs):
    """Number of series terms so that the remainder is below 1e-15 e^{gamma s}."""
    if gs <= 0:
        return 1
    n = max(int(gs) + 2, 2)
    while n * math.log(gs) - math.lgamma(n + 1) - gs > math.log(1e-16) and n < 2000:
        n += 1
    return n + 1


def hopping_Ik(params, k, s, series_cutoff=None):
    r"""Resolvent :math:`I_k(s)` for the kernel ``J0(omega_k t)``.

    Summed as :math:`\sum_{n\ge1} (\gamma s)^{n-1}/(n-1)!\;\hat J_{(n-1)/2}(\omega_k s)`
    with :math:`\hat J_\nu(z) = \Gamma(\nu+1)(2/z)^\nu J_\nu(z)`, which are
    the terms whose Laplace transforms are
    :math:`\gamma^{n-1}(z^2+\omega_k^2)^{-n/2}`. ``k`` and ``s`` broadcast.
    """
    k, s = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(s, dtype=float))
    g = params.gamma
    z = np.abs(dispersion(params, k)) * s
    smax = float(np.max(s)) if s.size else 0.0
    nterms = series_cutoff or _cutoff(g * smax)
    n_int = (nterms + 1) // 2  # n odd -> integer order (n-1)/2
    n_half = nterms // 2  # n even -> half-integer order
    total = np.zeros(k.shape)
    s_int = normalized_bessel_sequence(0, n_int - 1, z)
    s_half = normalized_bessel_sequence(0.5, n_half - 1, z) if n_half else None
    gs = g * s
    with np.errstate(divide="ignore"):
        lgs = np.log(gs)
    for n in range(1, nterms + 1):
        p = n - 1
        if p == 0:
            pre = np.ones_like(gs)
        else:
            pre = np.where(gs > 0, np.exp(p * lgs - math.lgamma(n)), 0.0)
        bes = s_int[p // 2] if p % 2 == 0 else s_half[p // 2]
        total += pre * bes
    return total


def _k_grid(k_points):
    if k_points < 64 or k_points % 2:
        raise ValueError("k_points must be even and >= 64")
    return -np.pi + 2 * np.pi * np.arange(k_points) / k_points


def hopping_click_mass(params, j, t, k_points=256, s_points=64):
    r"""Click-part probability of finding ``<q> = j``.

    :math:`e^{-\gamma t}\int_0^t \gamma ds \int dk/2\pi \cos(jk) I_k(s)`.
    The k-integral is a periodic trapezoid sum (spectrally accurate) and
    the s-integral Gauss-Legendre.
    """
    j = np.atleast_1d(np.asarray(j))
    g = params.gamma
    if t <= 0 or g == 0:
        return np.zeros(j.shape)
    k = _k_grid(k_points)
    x, w = np.polynomial.legendre.leggauss(s_points)
    s = 0.5 * t * (x + 1)
    w = 0.5 * t * w
    ik = hopping_Ik(params, k[None, :], s[:, None])
    # e^{-gamma t} folded in per node to avoid overflow at large gamma t
    ik_int = np.sum((g * w * np.exp(g * (s - t)))[:, None] * (ik * np.exp(-g * s)[:, None]), axis=0)
    mass = np.cos(np.outer(j, k)) @ ik_int / k_points
    if np.any(mass < -1e-8):
        raise NegativeMass(f"negative click mass {mass.min():.3e}")
    return mass.reshape(np.shape(np.asarray(j)) or (1,))


def hopping_site_density(params, j, t, k_points=256):
    r"""Averaged-state site occupation :math:`e^{-\gamma t}\int dk/2\pi\, e^{-ijk} I_k(t)`."""
    j = np.atleast_1d(np.asarray(j))
    k = _k_grid(k_points)
    ik = hopping_Ik(params, k, t) * np.exp(-params.gamma * t)
    return np.cos(np.outer(j, k)) @ ik / k_points


def hopping_second_moment(params, t):
    r"""Second moment of the ``<q>`` distribution,
    :math:`(4\Omega^2/\gamma^2)[(\gamma t - 2) + e^{-\gamma t}(\gamma t + 2)]`.

    For ``gamma t < 0.1`` the bracket is summed as its power series
    :math:`\sum_{m\ge3}(-1)^{m+1}(m-2)x^m/m!`, whose leading term gives
    :math:`(2/3)\gamma\Omega^2 t^3`.
    """
    t = np.asarray(t, dtype=float)
    g, om = params.gamma, params.omega
    x = g * t
    small = x < 0.1
    xs = np.where(small, x, 0.0)
    series = np.zeros_like(xs)
    for m in range(3, 20):
        series += (-1) ** (m + 1) * (m - 2) / math.factorial(m) * xs ** (m - 2)
    series = 4 * om**2 * t**2 * series
    with np.errstate(divide="ignore", invalid="ignore"):
        xl = np.where(small, 1.0, x)
        closed = 4 * om**2 / g**2 * ((xl - 2) + np.exp(-xl) * (xl + 2))
    return np.where(small, series, closed)


def _fd_weights(m, p):
    """Central-difference weights for the m-th derivative on offsets -p..p."""
    offs = np.arange(-p, p + 1, dtype=float)
    a = np.vander(offs, increasing=True).T
    rhs = np.zeros(2 * p + 1)
    rhs[m] = math.factorial(m)
    return offs, np.linalg.solve(a, rhs)


def hopping_qm_moment(params, m, t, step=None):
    r"""Averaged-state moment :math:`\langle q^m\rangle = i^m e^{-\gamma t}\partial_k^m I_k(t)|_{k=0}`.

    Odd ``m`` vanish by inversion symmetry. The derivative is a central
    finite difference: the 5-point stencil with step 1e-3 for ``m = 2``,
    wider stencils and steps for higher orders to keep round-off in check.
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    if m % 2 == 1:
        return 0.0
    if m == 0:
        return 1.0
    p = 2 if m == 2 else m // 2 + 3
    h = step if step is not None else (1e-3 if m == 2 else 0.05)
    offs, w = _fd_weights(m, p)
    vals = hopping_Ik(params, offs * h, t) * math.exp(-params.gamma * t)
    deriv = float(w @ vals) / h**m
    return float((1j**m).real) * deriv
