r"""Convolution Volterra equations of the second kind.

Solves

.. math::  I(s) = d(s) + \gamma \int_0^s d(s - s') I(s') \, ds'

by trapezoidal product integration on a uniform grid. The history sum is
a discrete convolution, evaluated with a divide-and-conquer scheme whose
off-diagonal blocks go through FFTs, so a grid of M nodes costs
``O(M log^2 M)`` rather than ``O(M^2)``. Several kernels sharing a grid
are solved together as one batch.

Closed forms for the two kernels that matter most (cosine and Bessel
:math:`J_0`) live here too, so the numerical solver always has an
independent reference.
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve

from .special import bessel_J, normalized_bessel_sequence

__all__ = [
    "ConvolutionKernel",
    "VolterraSolution",
    "StepTooLarge",
    "solve_volterra",
    "solve_volterra_batch",
    "volterra_series_term",
    "closed_form_qubit_I",
]

_DIRECT_BLOCK = 64
_LIMIT_TOL = 1e-8


class StepTooLarge(ValueError):
    """gamma * h >= 1: the implicit trapezoid divisor loses significance."""

    def __init__(self, gamma, h):
        self.suggested_h = 0.1 / gamma
        super().__init__(
            f"gamma*h = {gamma * h:.3g} >= 1; use h <= {self.suggested_h:.3g}"
        )


@dataclass(frozen=True)
class ConvolutionKernel:
    """Kernel ``d(t)`` of a convolution Volterra equation.

    ``kind`` is one of ``constant-one``, ``cosine``, ``bessel-J0`` or
    ``sampled``; ``frequency`` holds Omega (cosine) or omega (Bessel).
    """

    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    kind: str = "sampled"
    frequency: float = 0.0

    def __post_init__(self):
        d0 = complex(np.asarray(self.evaluator(np.zeros(1)))[0])
        if abs(d0 - 1.0) > 1e-12:
            raise ValueError(f"kernel must satisfy d(0) = 1, got {d0}")

    def __call__(self, t):
        return np.asarray(self.evaluator(np.asarray(t, dtype=float)))

    @classmethod
    def constant_one(cls):
        return cls(lambda t: np.ones_like(t), "constant-one")

    @classmethod
    def cosine(cls, omega):
        return cls(lambda t: np.cos(omega * t), "cosine", float(omega))

    @classmethod
    def bessel_j0(cls, omega):
        return cls(lambda t: bessel_J(0, omega * t), "bessel-J0", float(omega))


@dataclass(frozen=True, eq=False)
class VolterraSolution:
    """Samples ``I[0..M]`` of the solution on the grid ``s_i = i h``.

    When ``damping`` is non-zero the stored samples are
    ``e^{-damping s} I(s)``; :meth:`undamped` recovers ``I`` itself.
    """

    h: float
    values: np.ndarray
    gamma: float
    kernel: ConvolutionKernel = field(default=None, repr=False)
    error_estimate: float = float("nan")
    damping: float = 0.0

    @property
    def times(self):
        return self.h * np.arange(self.values.size)

    @property
    def t_max(self):
        return self.h * (self.values.size - 1)

    def __call__(self, s):
        """Value at arbitrary ``s`` in ``[0, t_max]`` (cubic interpolation)."""
        s = np.asarray(s, dtype=float)
        idx = s / self.h
        on_grid = np.abs(idx - np.round(idx)) < 1e-9
        if np.all(on_grid):
            return self.values[np.round(idx).astype(int)]
        return self.spline(s)

    @property
    def spline(self):
        return CubicSpline(self.times, self.values)

    def undamped(self):
        """Values of ``I`` itself (may overflow when ``damping * t_max`` is large)."""
        return self.values * np.exp(self.damping * self.times)


def _trapezoid_batch(d, gamma, h):
    """Solve the discretised equation for kernels sampled as rows of ``d``."""
    d = np.atleast_2d(np.asarray(d, dtype=complex))
    k, n = d.shape
    out = np.zeros((k, n), complex)
    out[:, 0] = d[:, 0]
    if n == 1:
        return out
    gh = gamma * h
    hist = np.zeros((k, n), complex)
    # j = 0 term of the trapezoid carries weight 1/2
    hist += 0.5 * d * out[:, :1]
    denom = 1.0 - 0.5 * gh * d[:, 0]

    def direct(lo, hi):
        for i in range(max(lo, 1), hi):
            jlo = max(lo, 1)
            if i > jlo:
                hist[:, i] += np.einsum("kj,kj->k", d[:, i - jlo : 0 : -1][:, : i - jlo], out[:, jlo:i])
            out[:, i] = (d[:, i] + gh * hist[:, i]) / denom

    def solve(lo, hi):
        if hi - lo <= _DIRECT_BLOCK:
            direct(lo, hi)
            return
        mid = (lo + hi) // 2
        solve(lo, mid)
        jlo = max(lo, 1)
        if mid > jlo:
            conv = fftconvolve(out[:, jlo:mid], d[:, : hi - jlo], axes=-1)
            hist[:, mid:hi] += conv[:, mid - jlo : hi - jlo]
        solve(mid, hi)

    solve(0, n)
    return out


def _grid(t_max, h):
    if h <= 0:
        raise ValueError("h must be positive")
    if t_max < h * (1 - 1e-12):
        raise ValueError("t_max must be at least h")
    m = int(math.ceil(t_max / h - 1e-9))
    return h * np.arange(m + 1)


def solve_volterra_batch(samples, gamma, h, kernels=None, estimate_error=True, damping=0.0):
    """Solve for several kernels already sampled on the grid ``i h``.

    Parameters
    ----------
    samples : array_like, shape (K, M + 1)
        Kernel values ``d_k(i h)``.
    gamma : float
        Measurement rate.
    h : float
        Grid step.
    kernels : sequence of ConvolutionKernel, optional
        Attached to the returned solutions for reference.
    estimate_error : bool
        If true, also solve on the doubled step and store the Richardson
        estimate ``max |I_h - I_2h| / 3`` (global error is O(h^2)).
    damping : float
        Solve for ``e^{-damping s} I(s)`` instead. Multiplying the kernel
        by ``e^{-damping s}`` maps the discrete scheme onto itself exactly,
        so this only changes the scale of the numbers. With
        ``damping = gamma`` the samples stay O(1) however large
        ``gamma * s`` gets.
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if gamma * h >= 1:
        raise StepTooLarge(gamma, h)
    d = np.atleast_2d(np.asarray(samples, dtype=complex))
    if damping:
        d = d * np.exp(-damping * h * np.arange(d.shape[1]))
    sol = _trapezoid_batch(d, gamma, h)
    err = np.full(d.shape[0], np.nan)
    if estimate_error and d.shape[1] >= 5 and 2 * gamma * h < 1:
        coarse = _trapezoid_batch(d[:, ::2], gamma, 2 * h)
        scale = np.maximum(np.abs(sol[:, ::2]).max(axis=1), 1.0)
        err = np.abs(sol[:, ::2] - coarse).max(axis=1) / 3.0 / scale
    kernels = kernels if kernels is not None else [None] * d.shape[0]
    return [
        VolterraSolution(h, _readonly(sol[i]), float(gamma), kernels[i], float(err[i]), float(damping))
        for i in range(d.shape[0])
    ]


def _readonly(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


def solve_volterra(kernel, gamma, t_max, h):
    """Trapezoidal product-integration solution on ``[0, t_max]``.

    At node ``i`` the scheme reads
    ``I_i = d_i + gamma h [d_i I_0 / 2 + sum_{j=1}^{i-1} d_{i-j} I_j + d_0 I_i / 2]``
    and is solved for ``I_i``. The grid extends to the first multiple of
    ``h`` at or beyond ``t_max``.

    Raises
    ------
    StepTooLarge
        If ``gamma * h >= 1``.

    Examples
    --------
    >>> sol = solve_volterra(ConvolutionKernel.constant_one(), 1.0, 2.0, 1e-3)
    >>> abs(sol.values[-1] - np.exp(2.0)) < 1e-5
    True
    """
    if gamma * h >= 1:
        raise StepTooLarge(gamma, h)
    s = _grid(t_max, h)
    return solve_volterra_batch(kernel(s)[None, :], gamma, h, [kernel])[0]


def volterra_series_term(omega, n, gamma, s):
    r"""n-th resummation term for the Bessel kernel ``J0(omega t)``.

    Equal to :math:`\sqrt{\pi}\gamma^{n-1}(s/2\omega)^{(n-1)/2}
    J_{(n-1)/2}(s\omega)/\Gamma(n/2)`, evaluated in the equivalent
    form :math:`(\gamma s)^{n-1}/(n-1)! \cdot \Gamma(\nu+1)(2/z)^\nu J_\nu(z)`
    with :math:`\nu=(n-1)/2`, :math:`z = s\omega`. The second factor is the
    normalised Bessel function, so the ``omega -> 0`` limit
    :math:`(\gamma s)^{n-1}/(n-1)!` needs no special casing.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    s = np.asarray(s, dtype=float)
    nu2 = n - 1
    nu0 = 0.0 if nu2 % 2 == 0 else 0.5
    step = nu2 // 2
    z = np.abs(omega) * s
    norm = normalized_bessel_sequence(nu0, step, z)[step]
    with np.errstate(divide="ignore"):
        logpre = nu2 * np.log(gamma * s) - math.lgamma(n) if nu2 else np.zeros_like(s)
    pre = np.exp(logpre) if nu2 else 1.0
    return pre * norm


def _sinhc_half(gamma_c, s):
    """sinh(G s / 2) / G for complex G, with the G -> 0 limit s/2."""
    x = 0.5 * gamma_c * s
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, gamma_c)
    val = np.sinh(np.where(small, 0.0, x)) / safe
    return np.where(small, 0.5 * s * (1.0 + x * x / 6.0), val)


def closed_form_qubit_I(gamma, omega, s):
    r"""Resolvent for the cosine kernel ``cos(omega t)``.

    :math:`I(s) = e^{\gamma s/2}[\cosh(\Gamma s/2) + (\gamma/\Gamma)\sinh(\Gamma s/2)]`
    with :math:`\Gamma = \sqrt{\gamma^2 - 4\omega^2}`; real trigonometric
    form below the critical rate, the linear limit at criticality.
    """
    s = np.asarray(s, dtype=float)
    if omega > 0 and abs(gamma - 2 * omega) < _LIMIT_TOL * omega:
        return np.exp(0.5 * gamma * s) * (1.0 + 0.5 * gamma * s)
    disc = gamma * gamma - 4.0 * omega * omega
    if disc < 0:
        w = math.sqrt(-disc)
        half = 0.5 * w * s
        return np.exp(0.5 * gamma * s) * (np.cos(half) + gamma * np.sin(half) / w)
    g = math.sqrt(disc)
    return np.exp(0.5 * gamma * s) * (np.cosh(0.5 * g * s) + gamma * _sinhc_half(g, s).real)
