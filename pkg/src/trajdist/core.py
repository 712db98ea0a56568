"""Monitored systems, unitary propagation and the transfer matrix.

A monitored system is an N-level Hamiltonian together with a rate at which
the state is projected onto the eigenbasis of a diagonal observable. The
transfer matrix ``T(t)[a', a] = |<a'|exp(-iHt)|a>|^2`` is doubly stochastic;
when the family ``{T(t)}`` commutes it shares a time-independent unitary
eigenbasis, which is what :func:`spectral_decompose` finds.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

__all__ = [
    "MonitoredSystem",
    "StateVector",
    "TransferSpectrum",
    "NonCommutingFamily",
    "propagate",
    "transition_matrix",
    "transition_matrices",
    "spectral_decompose",
]

HERMITIAN_TOL = 1e-12
COMMUTATOR_TOL = 1e-8


class NonCommutingFamily(ValueError):
    """The transfer matrices at different times have no common eigenbasis.

    The analytic route needs a time-independent diagonalising matrix; Monte
    Carlo sampling is still valid for such systems.
    """

    def __init__(self, residual, message=None):
        self.residual = float(residual)
        super().__init__(
            message
            or f"transfer matrices do not commute (residual {self.residual:.3e}); "
            "use the Monte Carlo engine for this system"
        )


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MonitoredSystem:
    """N-level system under Poisson-timed projective measurement.

    Parameters
    ----------
    hamiltonian : array_like, shape (N, N)
        Hermitian Hamiltonian in the measured basis (hbar = 1).
    observable_values : array_like, shape (N,)
        Eigenvalues ``o_a`` of the observable, diagonal in the measured basis.
    rate : float
        Measurement rate gamma >= 0.
    initial_index : int
        Index ``a0`` of the initial basis state.
    """

    hamiltonian: np.ndarray
    observable_values: np.ndarray
    rate: float
    initial_index: int = 0
    label: str = field(default="custom", compare=False)

    def __post_init__(self):
        h = _frozen(self.hamiltonian, complex)
        o = _frozen(self.observable_values, float)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 1:
            raise ValueError(f"hamiltonian must be square, got shape {h.shape}")
        n = h.shape[0]
        if o.shape != (n,):
            raise ValueError(f"observable_values must have shape ({n},), got {o.shape}")
        asym = float(np.max(np.abs(h - h.conj().T)))
        if asym > HERMITIAN_TOL:
            raise ValueError(f"hamiltonian is not Hermitian (max |H - H^dag| = {asym:.3e})")
        rate = float(self.rate)
        if not np.isfinite(rate) or rate < 0:
            raise ValueError(f"rate must be a non-negative number, got {self.rate}")
        a0 = int(self.initial_index)
        if not 0 <= a0 < n:
            raise ValueError(f"initial_index must lie in [0, {n}), got {self.initial_index}")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "observable_values", o)
        object.__setattr__(self, "rate", rate)
        object.__setattr__(self, "initial_index", a0)

    @property
    def dim(self):
        return self.hamiltonian.shape[0]

    @cached_property
    def eigensystem(self):
        """Cached ``(energies, eigenvectors)`` of the Hamiltonian."""
        e, w = np.linalg.eigh(self.hamiltonian)
        e.setflags(write=False)
        w.setflags(write=False)
        return e, w

    def with_rate(self, rate):
        return MonitoredSystem(
            self.hamiltonian, self.observable_values, rate, self.initial_index, self.label
        )

    def unitary(self, t):
        """``exp(-iHt)`` for a scalar time, or a stack of them for an array."""
        e, w = self.eigensystem
        t = np.asarray(t, dtype=float)
        phase = np.exp(-1j * t[..., None] * e)
        return (w * phase[..., None, :]) @ w.conj().T

    def expectation(self, amplitudes):
        """``<psi|O|psi>`` for the diagonal observable (works row-wise)."""
        amplitudes = np.asarray(amplitudes)
        return np.abs(amplitudes) ** 2 @ self.observable_values


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state in the measured basis."""

    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _frozen(self.amplitudes, complex))

    @classmethod
    def basis(cls, dim, index):
        psi = np.zeros(dim, complex)
        psi[index] = 1.0
        return cls(psi)

    @property
    def norm_deviation(self):
        return abs(float(np.vdot(self.amplitudes, self.amplitudes).real) - 1.0)

    @property
    def probabilities(self):
        return np.abs(self.amplitudes) ** 2


def propagate(system, state, dt):
    """Apply ``exp(-iH dt)`` to ``state`` using the cached eigendecomposition."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    psi = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, complex)
    if dt == 0:
        return StateVector(psi)
    e, w = system.eigensystem
    c = w.conj().T @ psi
    return StateVector(w @ (np.exp(-1j * e * dt) * c))


def propagate_batch(system, psi, dt):
    """Propagate rows of ``psi`` (shape (n, N)) by per-row times ``dt``."""
    e, w = system.eigensystem
    c = psi @ w.conj()
    c *= np.exp(-1j * np.outer(dt, e))
    return c @ w.T


def transition_matrix(system, t):
    """Transfer matrix ``T[a', a] = |<a'|U(t)|a>|^2`` (doubly stochastic)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return np.abs(system.unitary(t)) ** 2


def transition_matrices(system, times, chunk=512):
    """Stack of transfer matrices for an array of times, shape (M, N, N)."""
    times = np.asarray(times, dtype=float).ravel()
    n = system.dim
    out = np.empty((times.size, n, n))
    for i in range(0, times.size, chunk):
        out[i : i + chunk] = np.abs(system.unitary(times[i : i + chunk])) ** 2
    return out


@dataclass(frozen=True, eq=False)
class TransferSpectrum:
    """Common eigenbasis ``V`` of the transfer matrices and their eigenvalues.

    ``V[:, 0]`` is the flat vector ``1/sqrt(N)`` whose eigenvalue is
    identically 1. Eigenvalue functions are exact for any time: since ``V``
    is fixed, ``d(t) = diag(V^dag T(t) V)``.
    """

    system: MonitoredSystem
    V: np.ndarray
    sample_times: np.ndarray
    commutator_residual: float
    diagonalization_residual: float

    def eigenvalues(self, t):
        """``d_alpha(t)``; shape (N,) for scalar ``t`` or (M, N) for an array."""
        t = np.asarray(t, dtype=float)
        tm = transition_matrices(self.system, t.ravel())
        d = np.einsum("ai,mab,bi->mi", self.V.conj(), tm, self.V)
        return d.reshape(t.shape + (self.V.shape[1],))

    def reconstruct(self, t):
        d = self.eigenvalues(t)
        return (self.V * d) @ self.V.conj().T


def _canonical_phase(v):
    idx = np.argmax(np.abs(v) > np.abs(v).max() * (1 - 1e-9), axis=0)
    ph = v[idx, np.arange(v.shape[1])]
    return v * (np.abs(ph) / ph)


def spectral_decompose(system, sample_times, seed=0):
    """Find the time-independent eigenbasis of the transfer-matrix family.

    A random real combination of ``T(t_i)`` is diagonalised on the
    orthogonal complement of the flat vector; the basis is then validated
    against every sample time.

    Raises
    ------
    NonCommutingFamily
        When the sampled transfer matrices fail to commute (or are not
        simultaneously unitarily diagonalisable) within 1e-8.
    """
    times = np.unique(np.asarray(sample_times, dtype=float))
    if times.size < 2 or np.any(times <= 0):
        raise ValueError("need at least two distinct positive sample times")
    n = system.dim
    tm = transition_matrices(system, times)

    comm = 0.0
    for i in range(len(times)):
        for j in range(i + 1, len(times)):
            c = tm[i] @ tm[j] - tm[j] @ tm[i]
            comm = max(comm, float(np.max(np.abs(c))))
    if comm > COMMUTATOR_TOL:
        raise NonCommutingFamily(comm)

    flat = np.full(n, 1.0 / np.sqrt(n))
    if n == 1:
        v = flat[:, None].astype(complex)
        return TransferSpectrum(system, _frozen(v, complex), times, comm, 0.0)

    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(0.5, 1.5, size=len(times))
    m = np.tensordot(coeffs, tm, axes=1)
    # orthonormal complement of the flat vector
    q, _ = np.linalg.qr(np.column_stack([flat, np.eye(n)[:, : n - 1]]))
    q = q[:, 1:]
    q = q - np.outer(flat, flat @ q)
    q, _ = np.linalg.qr(q)
    m_red = q.conj().T @ m @ q
    if np.allclose(m_red, m_red.T.conj(), atol=1e-13):
        _, z = np.linalg.eigh(0.5 * (m_red + m_red.conj().T))
    else:
        _, z = scipy.linalg.schur(m_red.astype(complex), output="complex")
    v = np.column_stack([flat.astype(complex), q @ z])
    v[:, 1:] = _canonical_phase(v[:, 1:])

    d = np.einsum("ai,mab,bj->mij", v.conj(), tm, v)
    diag = np.einsum("mii->mi", d)
    off = d - np.einsum("mi,ij->mij", diag, np.eye(n))
    resid = float(np.max(np.abs(off)))
    if resid > COMMUTATOR_TOL:
        raise NonCommutingFamily(
            resid,
            f"transfer matrices are not simultaneously unitarily diagonalisable "
            f"(off-diagonal residual {resid:.3e}); use the Monte Carlo engine",
        )

    rest = np.argsort(-np.abs(diag[:, 1:]).mean(axis=0), kind="stable") + 1
    order = np.concatenate([[0], rest])
    v = v[:, order]
    return TransferSpectrum(system, _frozen(v, complex), times, comm, resid)
