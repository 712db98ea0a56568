"""Exact distribution of the observable's expectation value over trajectories.

At time t the value ``<psi|O|psi>`` is either the deterministic no-click
value, with probability ``e^{-gamma t}``, or it is fixed by the time ``s``
and outcome ``a`` of the last click: after that click the state evolves
freely for ``t - s`` and the value is ``X(a, t - s) = sum_a' o_a' T[a', a](t - s)``.
The weight of "last click at ``s`` with outcome ``a``" is
``gamma e^{-gamma t} Re sum_alpha V[a, alpha] I_alpha(s) conj(V[a0, alpha])``,
with ``I_alpha`` the Volterra resolvents of the transfer eigenvalues.
Sweeping ``s`` over a grid and depositing those weights at ``X`` builds the
whole law as atoms plus a histogram.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .core import spectral_decompose
from .volterra import solve_volterra_batch

__all__ = [
    "MixedDistribution",
    "NegativeWeight",
    "ImaginaryResidue",
    "uniform_edges",
    "observable_edges",
    "no_click_distribution",
    "click_distribution",
    "trajectory_distribution",
    "solve_transfer_volterra",
    "first_moment",
    "moment",
    "stationary_moment_diag",
]

WEIGHT_TOL = 1e-8
_CHUNK = 256


class NegativeWeight(ArithmeticError):
    """A deposited mass came out negative beyond round-off."""


class ImaginaryResidue(ArithmeticError):
    """The alpha-sum that must be real kept an imaginary part."""


def uniform_edges(lo, hi, bins):
    if not hi > lo or bins < 1:
        raise ValueError("need hi > lo and at least one bin")
    return np.linspace(lo, hi, int(bins) + 1)


def observable_edges(system, bins=400, lattice=None):
    """Default histogram edges for a system's observable.

    Lattice observables (by default: the hopping model's position) get unit
    bins centred on the integers, so lattice atoms never sit on an edge.
    Anything else gets ``bins`` uniform bins spanning ``[min o, max o]``.
    """
    o = system.observable_values
    lo, hi = float(o.min()), float(o.max())
    if lattice is None:
        lattice = system.label == "hopping"
    if lattice and np.all(o == np.round(o)):
        return np.arange(lo - 0.5, hi + 1.0, 1.0)
    if hi == lo:
        return uniform_edges(lo - 0.5, hi + 0.5, 1)
    return uniform_edges(lo, hi, bins)


def _check_uniform(edges):
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("edges must be a 1-D array with at least two entries")
    w = np.diff(edges)
    if np.any(w <= 0) or np.ptp(w) > 1e-9 * w.mean():
        raise ValueError("edges must be uniform and increasing")
    return edges


_EDGE_SNAP = 1e-9


def _grid_position(x, edges):
    """Position of x in units of the bin width, with values within round-off
    of an edge moved onto it (an atom at 0 computed as -1e-16 must not land
    in a different bin from sampled values at +1e-16)."""
    u = (np.asarray(x, dtype=float) - edges[0]) / (edges[1] - edges[0])
    r = np.rint(u)
    return np.where(np.abs(u - r) < _EDGE_SNAP, r, u)


def _bin_index(x, edges):
    """Bin of each x; values on or beyond the outer edges go to the end bins."""
    idx = np.floor(_grid_position(x, edges)).astype(np.int64)
    return np.clip(idx, 0, edges.size - 2)


@dataclass(frozen=True, eq=False)
class MixedDistribution:
    """Probability law made of point masses and a histogram density.

    Attributes
    ----------
    edges : ndarray
        Uniform bin edges of the continuous part.
    density : ndarray
        Probability per unit x in each bin (piecewise constant).
    atom_locations, atom_weights : ndarray
        Point masses.
    t : float
        Time the law refers to.
    """

    edges: np.ndarray
    density: np.ndarray
    atom_locations: np.ndarray = field(default_factory=lambda: np.zeros(0))
    atom_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    t: float = 0.0

    def __post_init__(self):
        edges = _check_uniform(self.edges)
        dens = np.asarray(self.density, dtype=float)
        if dens.shape != (edges.size - 1,):
            raise ValueError("density must have one value per bin")
        loc = np.atleast_1d(np.asarray(self.atom_locations, dtype=float))
        wts = np.atleast_1d(np.asarray(self.atom_weights, dtype=float))
        if loc.shape != wts.shape:
            raise ValueError("atom locations and weights differ in length")
        order = np.argsort(loc, kind="stable")
        loc, wts = loc[order], wts[order]
        if loc.size > 1:
            # merge coincident atoms (e.g. the no-click atom and a click atom)
            tol = 1e-12 * max(1.0, float(np.abs(loc).max()))
            start = np.concatenate([[True], np.diff(loc) > tol])
            group = np.cumsum(start) - 1
            wts = np.bincount(group, weights=wts)
            loc = loc[start]
        for name, val in (
            ("edges", edges),
            ("density", dens),
            ("atom_locations", loc),
            ("atom_weights", wts),
        ):
            val = np.array(val)
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def bin_width(self):
        return float(self.edges[1] - self.edges[0])

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def bin_masses(self):
        return self.density * self.bin_width

    @property
    def continuous_mass(self):
        return float(self.bin_masses.sum())

    @property
    def atom_mass(self):
        return float(self.atom_weights.sum())

    def total_mass(self):
        return self.atom_mass + self.continuous_mass

    def moment(self, k):
        """``sum w x^k`` over atoms plus the exact integral of the histogram."""
        if k < 0:
            raise ValueError("k must be non-negative")
        a, b = self.edges[:-1], self.edges[1:]
        cont = self.density * (b ** (k + 1) - a ** (k + 1)) / (k + 1)
        return float(np.sum(self.atom_weights * self.atom_locations**k) + cont.sum())

    def cdf_at_edges(self):
        """Distribution function at every edge, atoms included.

        An atom counts towards edge ``e`` when it lies strictly below ``e``
        (all atoms count at the last edge), matching ``np.histogram`` bins.
        """
        cont = np.concatenate([[0.0], np.cumsum(self.bin_masses)])
        pos = _grid_position(self.atom_locations, self.edges)
        order = np.argsort(pos, kind="stable")
        below = np.searchsorted(pos[order], np.arange(self.edges.size), side="left")
        below[-1] = pos.size
        atoms = np.concatenate([[0.0], np.cumsum(self.atom_weights[order])])[below]
        return cont + atoms

    def atoms_on_grid(self):
        """All mass as bin masses (atoms dropped into their bins)."""
        m = self.bin_masses.copy()
        np.add.at(m, _bin_index(self.atom_locations, self.edges), self.atom_weights)
        return m

    def combine(self, other):
        """Sum of two sub-probability laws on the same grid."""
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot combine distributions on different grids")
        return MixedDistribution(
            self.edges,
            self.density + other.density,
            np.concatenate([self.atom_locations, other.atom_locations]),
            np.concatenate([self.atom_weights, other.atom_weights]),
            self.t,
        )


def _no_click_value(system, t):
    a0 = system.initial_index
    if t == 0:
        return float(system.observable_values[a0])
    u = system.unitary(t)[:, a0]
    return float(system.expectation(u))


def no_click_distribution(system, t, edges=None):
    """Single atom at ``<a0|U(t)^dag O U(t)|a0>`` with weight ``e^{-gamma t}``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    edges = observable_edges(system) if edges is None else edges
    e = _check_uniform(edges)
    return MixedDistribution(
        e, np.zeros(e.size - 1), [_no_click_value(system, t)], [math.exp(-system.rate * t)], t
    )


def _transfer_data(system, spectrum, times, columns=None, eigenvalues=True, chunk=_CHUNK):
    """Per time: ``X[:, a] = (o @ T)[a]`` and, optionally, ``d = diag(V^dag T V)``.

    ``columns`` restricts X to a subset of initial indices ``a``, which only
    needs those columns of ``U`` (cost ``N^2`` per column instead of ``N^3``).
    """
    times = np.asarray(times, dtype=float)
    n = system.dim
    o = system.observable_values
    e, w = system.eigensystem
    cols = np.arange(n) if columns is None else np.asarray(columns)
    wa = w.conj().T[:, cols]  # (N_k, n_cols)
    v = spectrum.V
    x = np.empty((times.size, cols.size))
    d = np.empty((times.size, n), complex) if eigenvalues else None
    for i in range(0, times.size, chunk):
        tt = times[i : i + chunk]
        ph = np.exp(-1j * np.outer(tt, e))  # (m, N_k)
        # U[:, :, cols] = W diag(ph) W^dag[:, cols], done as one 2-D product
        left = (ph[:, :, None] * wa[None]).transpose(0, 2, 1).reshape(-1, n)
        u = (left @ w.T).reshape(tt.size, cols.size, n)  # u[m, c, a'] = U[a', cols[c]]
        tm = u.real**2 + u.imag**2
        x[i : i + chunk] = tm @ o
        if eigenvalues:
            # (V^dag T V)_{ii} = sum_{a', a} conj(V[a', i]) T[a', a] V[a, i]
            tv = (tm.reshape(-1, n) @ v.conj()).reshape(tt.size, n, n)  # [m, a, i]
            d[i : i + chunk] = np.einsum("mai,ai->mi", tv, v)
    return x, d


def _step_for(t, h):
    """Largest step <= h that puts t on the grid."""
    if t <= 0:
        return h
    return t / math.ceil(t / h - 1e-9)


def solve_transfer_volterra(spectrum, t_max, h, damped=True):
    """Volterra resolvents for every transfer eigenvalue on ``[0, t_max]``.

    Identical eigenvalue functions (common by symmetry) are solved once.
    With ``damped`` the stored samples are ``e^{-gamma s} I_alpha(s)``.
    """
    system = spectrum.system
    g = system.rate
    h = _step_for(t_max, h)
    m = int(round(t_max / h))
    s = h * np.arange(m + 1)
    _, d = _transfer_data(system, spectrum, s)
    d = d.T
    d[:, 0] = 1.0
    # collapse duplicate kernels
    key = np.round(np.concatenate([d.real, d.imag], axis=1) * 1e11)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    sols = solve_volterra_batch(d[first], g, h, damping=g if damped else 0.0)
    return [sols[j] for j in np.asarray(inverse).ravel()]


def _resolvent_at(volterra, t):
    """Stored (possibly damped) samples of each solution at time ``t``."""
    out = np.empty(len(volterra), complex)
    for i, sol in enumerate(volterra):
        out[i] = sol(t) if t > 0 else sol.values[0]
    return out


def first_moment(system, spectrum, volterra, t):
    """Mean of the distribution, ``e^{-gamma t} sum_a o_a sum_alpha V I_alpha(t) V^dag``.

    Only meaningful for observables diagonal in the measured basis, which
    is the only kind a MonitoredSystem can carry.
    """
    g = system.rate
    v = spectrum.V
    vals = _resolvent_at(volterra, t)
    scale = np.array([math.exp(-(g - sol.damping) * t) for sol in volterra])
    coeff = v @ (vals * scale * v[system.initial_index].conj())
    res = system.observable_values @ coeff
    return float(res.real)


def stationary_moment_diag(system, spectrum=None):
    """Long-time mean, the flat average ``(1/N) sum_a o_a``."""
    return float(np.mean(system.observable_values))


def moment(distribution, k):
    return distribution.moment(k)


def _last_click_weights(system, spectrum, volterra, s, t):
    """``e^{-gamma t} Re sum_alpha V[a, alpha] I_alpha(s) conj(V[a0, alpha])`` per node."""
    g = system.rate
    v = spectrum.V
    vals = np.empty((s.size, len(volterra)), complex)
    h = volterra[0].h
    idx = s / h
    on_grid = np.all(np.abs(idx - np.round(idx)) < 1e-9)
    for j, sol in enumerate(volterra):
        if on_grid:
            vals[:, j] = sol.values[np.round(idx).astype(int)]
        else:
            vals[:, j] = sol.spline(s)
        vals[:, j] *= np.exp(-(g - sol.damping) * s - g * (t - s))
    c = (vals * v[system.initial_index].conj()) @ v.T
    resid = float(np.max(np.abs(c.imag))) if c.size else 0.0
    if resid > WEIGHT_TOL:
        raise ImaginaryResidue(f"imaginary part {resid:.3e} left in the last-click weights")
    return c.real


def _trapezoid_weights(m, h):
    w = np.full(m + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


def click_distribution(system, spectrum, volterra, t, edges=None, oversample=None, workers=1):
    """Law of the value after at least one click, as atoms plus histogram.

    Parameters
    ----------
    system, spectrum : MonitoredSystem, TransferSpectrum
    volterra : list of VolterraSolution
        One per transfer eigenvalue, sharing a step ``h`` and covering ``[0, t]``.
    t : float
        Must be a multiple of ``h``.
    edges : array_like, optional
        Uniform histogram edges (default :func:`observable_edges`).
    oversample : int, optional
        Sub-steps per Volterra step for the continuous part; the default
        aims at about 200 samples per bin along the path of ``X``.
    workers : int
        Threads used for the deposits; the result does not depend on it.

    Raises
    ------
    NegativeWeight
        If a bin or atom receives mass below -1e-8.
    ImaginaryResidue
        If the alpha-sum keeps an imaginary part above 1e-8.
    """
    edges = _check_uniform(observable_edges(system) if edges is None else edges)
    nb = edges.size - 1
    g = system.rate
    if t < 0:
        raise ValueError("t must be non-negative")
    h = volterra[0].h
    if any(abs(sol.h - h) > 1e-15 * h for sol in volterra):
        raise ValueError("Volterra solutions must share one step")
    if t == 0 or g == 0:
        return MixedDistribution(edges, np.zeros(nb), [], [], t)
    m = int(round(t / h))
    if abs(m * h - t) > 1e-9 * max(t, 1.0):
        raise ValueError(f"t = {t} is not on the Volterra grid (step {h})")
    if volterra[0].t_max < t * (1 - 1e-12):
        raise ValueError("Volterra solutions do not reach t")

    s = h * np.arange(m + 1)
    x, _ = _transfer_data(system, spectrum, t - s, eigenvalues=False)
    c = _last_click_weights(system, spectrum, volterra, s, t)
    w = g * _trapezoid_weights(m, h)

    spread = np.ptp(x, axis=0)
    scale = max(float(np.ptp(system.observable_values)), 1.0)
    is_atom = spread <= 1e-9 * scale

    locs, wts = [], []
    for a in np.flatnonzero(is_atom):
        locs.append(float(np.mean(x[:, a])))
        wts.append(float(w @ c[:, a]))
    masses = np.zeros(nb)

    moving = np.flatnonzero(~is_atom)
    if moving.size:
        width = edges[1] - edges[0]
        if oversample is None:
            slope = np.max(np.abs(np.diff(x[:, moving], axis=0))) / h
            oversample = int(min(256, max(1, math.ceil(200 * slope * h / width))))
        sub = int(oversample)
        fine_m = m * sub
        hf = h / sub
        splines = None
        if sub > 1:
            splines = [CubicSpline(s, c[:, a]) for a in moving]

        def deposit(lo, hi):
            sf = hf * np.arange(lo, hi)
            xf, _ = _transfer_data(system, spectrum, t - sf, moving, eigenvalues=False)
            wf = np.full(hi - lo, g * hf)
            wf[np.arange(lo, hi) == 0] *= 0.5
            wf[np.arange(lo, hi) == fine_m] *= 0.5
            out = np.zeros(nb)
            for j, a in enumerate(moving):
                cf = c[lo:hi, a] if sub == 1 else splines[j](sf)
                out += np.bincount(_bin_index(xf[:, j], edges), weights=wf * cf, minlength=nb)
            return out

        step = 4096
        ranges = [(lo, min(lo + step, fine_m + 1)) for lo in range(0, fine_m + 1, step)]
        if workers and workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                parts = list(pool.map(lambda r: deposit(*r), ranges))
        else:
            parts = [deposit(*r) for r in ranges]
        for part in parts:  # fixed order keeps the sum independent of workers
            masses += part

    if masses.size and masses.min() < -WEIGHT_TOL:
        raise NegativeWeight(f"bin mass {masses.min():.3e} is negative")
    if wts and min(wts) < -WEIGHT_TOL:
        raise NegativeWeight(f"atom weight {min(wts):.3e} is negative")
    masses = np.maximum(masses, 0.0)
    wts = [max(wv, 0.0) for wv in wts]
    return MixedDistribution(edges, masses / (edges[1] - edges[0]), locs, wts, t)


def _sample_times(t):
    base = np.array([0.173, 0.419, 0.787, 1.31, 2.29])
    return base * max(t, 1.0)


def trajectory_distribution(system, t, edges=None, h=1e-3, oversample=None, workers=1, spectrum=None):
    """Full law (no-click atom plus click part) at time ``t``.

    Returns
    -------
    distribution : MixedDistribution
    spectrum : TransferSpectrum
    volterra : list of VolterraSolution
    """
    edges = observable_edges(system) if edges is None else edges
    spectrum = spectrum or spectral_decompose(system, _sample_times(t))
    if t == 0:
        return no_click_distribution(system, 0.0, edges), spectrum, []
    volterra = solve_transfer_volterra(spectrum, t, h)
    click = click_distribution(system, spectrum, volterra, t, edges, oversample, workers)
    return no_click_distribution(system, t, edges).combine(click), spectrum, volterra
