"""Trajectory-averaged dynamics: dephasing Lindblad equation in the measured basis.

    d rho / dt = -i [H, rho] + gamma (sum_a P_a rho P_a - rho)

The dissipator just damps off-diagonal elements at rate gamma. The
integrator is plain fixed-step RK4; Bloch closed forms for the qubit and
site densities for the hopping particle sit alongside as references.

Long runs go through a compiled loop: the certified step is small (about
1e-3 / (|H| + gamma)), so a ten-unit run on an 81-site ring is ~10^5 steps
and per-step array overhead would dominate. The loop keeps H in CSR form
and uses ``rho H = (H rho)^dagger``, which holds for every RK4 stage
because each stage stays Hermitian.
"""

import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse

from .volterra import _sinhc_half

__all__ = [
    "DensityMatrix",
    "TraceDrift",
    "lindblad_rhs",
    "lindblad_step",
    "integrate_lindblad",
    "max_step",
    "qubit_bloch_solution",
    "site_density",
]


class TraceDrift(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    rho: np.ndarray

    @classmethod
    def pure_basis(cls, dim, index):
        rho = np.zeros((dim, dim), complex)
        rho[index, index] = 1.0
        return cls(rho)

    @property
    def trace(self):
        return float(np.trace(self.rho).real)

    @property
    def purity(self):
        return float(np.vdot(self.rho, self.rho).real)

    @property
    def populations(self):
        return np.diag(self.rho).real.copy()

    def expectation(self, observable_values):
        return float(self.populations @ observable_values)

    def hermiticity_error(self):
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T)).min())


def max_step(system):
    """Largest RK4 step accepted without ``check_step=False``."""
    return 1e-3 / (np.linalg.norm(system.hamiltonian, 2) + system.rate)


def _operator(system):
    h = system.hamiltonian
    if h.shape[0] > 16 and np.count_nonzero(h) < 0.1 * h.size:
        return scipy.sparse.csr_matrix(h)
    return h


@numba.njit(cache=True)
def _apply_generator(indptr, indices, data, gamma, x, hx, out):
    n = x.shape[0]
    hx[:, :] = 0.0
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            k = indices[p]
            v = data[p]
            for j in range(n):
                hx[i, j] += v * x[k, j]
    for i in range(n):
        for j in range(n):
            val = -1j * (hx[i, j] - np.conj(hx[j, i]))
            if i != j:
                val -= gamma * x[i, j]
            out[i, j] = val


@numba.njit(cache=True)
def _rk4_run(indptr, indices, data, gamma, rho, dt, nsteps):
    """Advance ``rho`` by ``nsteps`` RK4 steps; also return the worst trace drift."""
    n = rho.shape[0]
    r = rho.copy()
    hx = np.empty_like(r)
    k1 = np.empty_like(r)
    k2 = np.empty_like(r)
    k3 = np.empty_like(r)
    k4 = np.empty_like(r)
    y = np.empty_like(r)
    drift = 0.0
    for _ in range(nsteps):
        _apply_generator(indptr, indices, data, gamma, r, hx, k1)
        for i in range(n):
            for j in range(n):
                y[i, j] = r[i, j] + 0.5 * dt * k1[i, j]
        _apply_generator(indptr, indices, data, gamma, y, hx, k2)
        for i in range(n):
            for j in range(n):
                y[i, j] = r[i, j] + 0.5 * dt * k2[i, j]
        _apply_generator(indptr, indices, data, gamma, y, hx, k3)
        for i in range(n):
            for j in range(n):
                y[i, j] = r[i, j] + dt * k3[i, j]
        _apply_generator(indptr, indices, data, gamma, y, hx, k4)
        tr = 0.0
        for i in range(n):
            for j in range(n):
                r[i, j] += dt / 6.0 * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
            tr += r[i, i].real
        drift = max(drift, abs(tr - 1.0))
    return r, drift


def _csr_parts(system):
    h = scipy.sparse.csr_matrix(np.asarray(system.hamiltonian, complex))
    h.sort_indices()
    return h.indptr.astype(np.int64), h.indices.astype(np.int64), h.data.astype(complex)


def lindblad_rhs(h, gamma, rho):
    hr = h @ rho
    out = -1j * (hr - hr.conj().T)
    if gamma:
        out -= gamma * rho
        out[np.diag_indices_from(out)] += gamma * np.diag(rho)
    return out


def lindblad_step(system, rho, dt, check_step=True, _h=None):
    """One RK4 step of the master equation; returns a new DensityMatrix.

    Raises
    ------
    ValueError
        If ``dt`` exceeds :func:`max_step` and ``check_step`` is set.
    TraceDrift
        If the trace leaves 1 by more than 1e-6.
    """
    if check_step and dt > max_step(system) * (1 + 1e-12):
        raise ValueError(f"dt = {dt:.3g} exceeds the certified step {max_step(system):.3g}")
    r = rho.rho if isinstance(rho, DensityMatrix) else np.asarray(rho, complex)
    h = _h if _h is not None else _operator(system)
    g = system.rate
    k1 = lindblad_rhs(h, g, r)
    k2 = lindblad_rhs(h, g, r + 0.5 * dt * k1)
    k3 = lindblad_rhs(h, g, r + 0.5 * dt * k2)
    k4 = lindblad_rhs(h, g, r + dt * k3)
    new = r + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    tr = np.trace(new).real
    if abs(tr - 1.0) > 1e-6:
        raise TraceDrift(f"trace drifted to {tr:.9f}")
    return DensityMatrix(new)


def integrate_lindblad(system, times, dt=None, rho0=None, check_step=True):
    """Integrate from ``rho0`` (default ``|a0><a0|``) and snapshot at ``times``.

    The step is shrunk slightly so every requested time is hit exactly.
    Returns a list of DensityMatrix in the order of ``times``.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    dt = max_step(system) if dt is None else float(dt)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if check_step and dt > max_step(system) * (1 + 1e-12):
        raise ValueError(f"dt = {dt:.3g} exceeds the certified step {max_step(system):.3g}")
    start = rho0 if rho0 is not None else DensityMatrix.pure_basis(system.dim, system.initial_index)
    rho = np.array(start.rho if isinstance(start, DensityMatrix) else start, dtype=complex)
    if np.max(np.abs(rho - rho.conj().T)) > 1e-9:
        raise ValueError("initial density matrix must be Hermitian")
    parts = _csr_parts(system)
    order = np.argsort(times, kind="stable")
    out = [None] * len(times)
    now = 0.0
    for i in order:
        span = times[i] - now
        if span > 0:
            n = max(1, math.ceil(span / dt - 1e-9))
            rho, drift = _rk4_run(*parts, float(system.rate), rho, span / n, n)
            if drift > 1e-6:
                raise TraceDrift(f"trace drifted by {drift:.3g}")
            now = times[i]
        out[i] = DensityMatrix(rho.copy())
    return out


def qubit_bloch_solution(params, t):
    """Closed-form Bloch vector ``(m_x, m_y, m_z)`` for the monitored qubit.

    ``m_z = e^{-gt/2}[cosh(Gt/2) + (g/G) sinh(Gt/2)]`` and
    ``m_y = e^{-gt/2} (2 Omega / G) sinh(Gt/2)``, ``G = sqrt(g^2 - 4 Omega^2)``.
    """
    t = np.asarray(t, dtype=float)
    g, om = params.gamma, params.omega
    big = complex(g * g - 4 * om * om) ** 0.5
    if abs(g - 2 * om) < 1e-8 * om:
        big = 0j
    damp = np.exp(-0.5 * g * t)
    sh = _sinhc_half(big, t)
    mz = damp * (np.cosh(0.5 * big * t) + g * sh).real
    my = damp * (2 * om * sh).real
    return np.zeros_like(mz), my, mz


def site_density(system, t, dt=None, check_step=True):
    """Site occupations ``n(j, t) = Tr[rho(t) P_j]`` from the integrator.

    Warns when the occupation at the ring antipode exceeds 1e-8, which means
    the ring is too small to stand in for the infinite chain.
    """
    rho = integrate_lindblad(system, [t], dt=dt, check_step=check_step)[0]
    n = rho.populations
    antipode = (system.initial_index + system.dim // 2) % system.dim
    if n[antipode] > 1e-8:
        warnings.warn(
            f"occupation {n[antipode]:.2e} at the ring antipode; enlarge the ring",
            RuntimeWarning,
            stacklevel=2,
        )
    return n
