"""Monte Carlo sampling of measurement trajectories.

Clicks arrive as a Poisson process (exponential waiting times). Each click
projects onto a basis state drawn with the Born rule, so after a click the
state is exactly ``|a>`` and the next Born distribution is the column
``|U(tau)[:, a]|^2``. Trajectories are processed in fixed-size chunks, all
active members of a chunk advancing one click per iteration; the eigenbasis
products for a whole chunk are then a single matrix product.

Randomness is counter-based: trajectory ``i`` owns the seed
``mix_seed(base_seed, i)`` and its ``e``-th click reads words of Philox
block ``e // 2``. Results are therefore identical for any number of
workers.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analytic import _bin_index, _check_uniform, observable_edges
from .core import StateVector
from .rng import mix_seed, uniforms

__all__ = [
    "TrajectoryRecord",
    "EnsembleStats",
    "GridMismatch",
    "sample_trajectory",
    "run_ensemble",
    "distribution_distance",
    "default_workers",
]

CHUNK = 4096
JACKKNIFE_BLOCKS = 100


class GridMismatch(ValueError):
    """The two distributions were binned on different edges."""


def default_workers():
    """Worker count from ``TRAJDIST_WORKERS`` (default 1)."""
    raw = os.environ.get("TRAJDIST_WORKERS", "1")
    try:
        k = int(raw)
    except ValueError as exc:
        raise ValueError(f"TRAJDIST_WORKERS must be a positive integer, got {raw!r}") from exc
    if k < 1:
        raise ValueError(f"TRAJDIST_WORKERS must be a positive integer, got {raw!r}")
    return k


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """One sampled trajectory on ``[0, t]``."""

    jump_times: np.ndarray
    outcomes: np.ndarray
    final_state: StateVector
    final_value: float
    seed: int = 0

    @property
    def n_jumps(self):
        return int(self.jump_times.size)


class _Evolver:
    """Columns ``U(tau)[:, a]`` for batches of (a, tau) pairs."""

    def __init__(self, system):
        e, w = system.eigensystem
        self.e = np.asarray(e)
        self.real = bool(np.all(w.imag == 0))
        self.w = np.ascontiguousarray(w.real if self.real else w)
        self.wt = np.ascontiguousarray(self.w.T)
        self.wc = np.ascontiguousarray(self.w.conj())

    def amplitudes(self, a, tau):
        """Rows ``U(tau_i)[:, a_i]``, shape (len(a), N)."""
        arg = np.outer(tau, self.e)
        if self.real:
            rows = self.w[a]
            re = (np.cos(arg) * rows) @ self.wt
            im = (np.sin(arg) * rows) @ self.wt
            return re - 1j * im
        return (np.exp(-1j * arg) * self.wc[a]) @ self.wt

    def probabilities(self, a, tau):
        arg = np.outer(tau, self.e)
        if self.real:
            rows = self.w[a]
            re = (np.cos(arg) * rows) @ self.wt
            im = (np.sin(arg) * rows) @ self.wt
            return re * re + im * im
        amp = (np.exp(-1j * arg) * self.wc[a]) @ self.wt
        return amp.real**2 + amp.imag**2


def _run_chunk(system, evolver, t, seeds, log_events=False):
    """Advance every trajectory of one chunk to time ``t``.

    Returns final outcome index, time of last click, click counts, worst
    Born-norm deviation and (optionally) the click log as
    (trajectory, time, outcome) arrays.
    """
    n = seeds.size
    g = system.rate
    dim = system.dim
    a = np.full(n, system.initial_index, dtype=np.int64)
    last = np.zeros(n)
    count = np.zeros(n, dtype=np.int64)
    worst = 0.0
    log = ([], [], [])
    active = np.arange(n) if (g > 0 and t > 0) else np.zeros(0, dtype=np.int64)
    block = None
    e = 0
    while active.size:
        if e % 2 == 0:
            block = uniforms(seeds[active], e // 2)
        word = 2 * (e % 2)
        u_time, u_pick = block[:, word], block[:, word + 1]
        s_new = last[active] - np.log1p(-u_time) / g
        alive = s_new < t
        if not alive.all():
            active, block = active[alive], block[alive]
            s_new, u_pick = s_new[alive], u_pick[alive]
        if not active.size:
            break
        p = evolver.probabilities(a[active], s_new - last[active])
        cdf = np.cumsum(p, axis=1)
        total = cdf[:, -1]
        worst = max(worst, float(np.max(np.abs(total - 1.0))))
        pick = np.count_nonzero(cdf <= (u_pick * total)[:, None], axis=1)
        pick = np.minimum(pick, dim - 1)
        a[active] = pick
        last[active] = s_new
        count[active] += 1
        if log_events:
            log[0].append(active.copy())
            log[1].append(s_new.copy())
            log[2].append(pick.copy())
        e += 1
    return a, last, count, worst, log


def _final_amplitudes(system, evolver, a, last, t):
    return evolver.amplitudes(a, t - last)


def sample_trajectory(system, t, seed):
    """Sample one trajectory with the given 64-bit seed.

    The record is the same one :func:`run_ensemble` produces for trajectory
    ``i`` when ``seed = mix_seed(base_seed, i)``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    evolver = _Evolver(system)
    seeds = np.array([int(seed) % 2**64], dtype=np.uint64)
    a, last, count, _, log = _run_chunk(system, evolver, t, seeds, log_events=True)
    times = np.concatenate(log[1]) if log[1] else np.zeros(0)
    outs = np.concatenate(log[2]) if log[2] else np.zeros(0, dtype=np.int64)
    amp = _final_amplitudes(system, evolver, a, last, t)[0]
    value = float(system.expectation(amp))
    return TrajectoryRecord(times, outs, StateVector(amp), value, int(seeds[0]))


def _jackknife_se(x, blocks=JACKKNIFE_BLOCKS):
    """Blocked jackknife standard error of the mean of ``x``."""
    n = x.size
    if n < 2:
        return float("nan")
    b = min(blocks, n)
    edges = np.linspace(0, n, b + 1).astype(int)
    sums = np.add.reduceat(x, edges[:-1])
    sizes = np.diff(edges)
    loo = (x.sum() - sums) / (n - sizes)
    return float(math.sqrt((b - 1) / b * np.sum((loo - loo.mean()) ** 2)))


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Summary of an ensemble of trajectories at time ``t``.

    ``values`` and ``jump_counts`` are kept in trajectory-index order, so
    everything derived from them is reproducible bit for bit.
    """

    t: float
    base_seed: int
    edges: np.ndarray
    values: np.ndarray
    jump_counts: np.ndarray
    max_norm_deviation: float
    records: list = field(default=None, repr=False)

    @property
    def n_traj(self):
        return int(self.values.size)

    @property
    def counts(self):
        idx = _bin_index(self.values, self.edges)
        return np.bincount(idx, minlength=self.edges.size - 1)

    @property
    def histogram_mass(self):
        return float(self.counts.sum()) / self.n_traj

    @property
    def density(self):
        return self.counts / (self.n_traj * (self.edges[1] - self.edges[0]))

    @property
    def no_click_fraction(self):
        return float(np.mean(self.jump_counts == 0))

    @property
    def no_click_se(self):
        p = self.no_click_fraction
        return math.sqrt(max(p * (1 - p), 0.0) / self.n_traj)

    @property
    def jump_mean(self):
        return float(np.mean(self.jump_counts))

    @property
    def jump_var(self):
        return float(np.var(self.jump_counts, ddof=1)) if self.n_traj > 1 else 0.0

    def moment(self, k):
        return float(np.mean(self.values**k))

    def moment_se(self, k):
        return _jackknife_se(self.values**k)

    def cdf_at_edges(self):
        c = np.concatenate([[0], np.cumsum(self.counts)])
        return c / self.n_traj

    def summary(self):
        return {
            "t": self.t,
            "n_traj": self.n_traj,
            "base_seed": self.base_seed,
            "m1": self.moment(1),
            "m1_se": self.moment_se(1),
            "m2": self.moment(2),
            "m2_se": self.moment_se(2),
            "m4": self.moment(4),
            "m4_se": self.moment_se(4),
            "no_click_fraction": self.no_click_fraction,
            "no_click_se": self.no_click_se,
            "jump_mean": self.jump_mean,
            "jump_var": self.jump_var,
            "histogram_mass": self.histogram_mass,
            "max_norm_deviation": self.max_norm_deviation,
        }


def run_ensemble(system, t, n_traj, base_seed=0, workers=None, edges=None, keep_records=False):
    """Sample ``n_traj`` trajectories and summarise them.

    Parameters
    ----------
    system : MonitoredSystem
    t : float
        Final time.
    n_traj : int
        Number of trajectories (>= 1).
    base_seed : int
        Trajectory ``i`` uses seed ``mix_seed(base_seed, i)``.
    workers : int, optional
        Threads; defaults to ``TRAJDIST_WORKERS`` or 1. Has no effect on
        the result.
    edges : array_like, optional
        Histogram edges (default :func:`trajdist.analytic.observable_edges`).
    keep_records : bool
        Also return per-trajectory click times and outcomes.
    """
    n_traj = int(n_traj)
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    if t < 0:
        raise ValueError("t must be non-negative")
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValueError("workers must be positive")
    edges = _check_uniform(observable_edges(system) if edges is None else edges)
    base_seed = int(base_seed) % 2**64
    evolver = _Evolver(system)
    starts = list(range(0, n_traj, CHUNK))

    def work(lo):
        hi = min(lo + CHUNK, n_traj)
        seeds = mix_seed(base_seed, np.arange(lo, hi, dtype=np.uint64))
        a, last, count, worst, log = _run_chunk(system, evolver, t, seeds, keep_records)
        vals = system.expectation(_final_amplitudes(system, evolver, a, last, t))
        recs = None
        if keep_records:
            recs = _collect(lo, hi, seeds, log)
        return vals, count, worst, recs

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(lo) for lo in starts]
    values = np.concatenate([p[0] for p in parts])
    counts = np.concatenate([p[1] for p in parts])
    worst = max(p[2] for p in parts)
    records = [r for p in parts for r in p[3]] if keep_records else None
    for arr in (values, counts):
        arr.setflags(write=False)
    return EnsembleStats(float(t), base_seed, edges, values, counts, worst, records)


def _collect(lo, hi, seeds, log):
    """Per-trajectory click lists from a chunk's event log."""
    n = hi - lo
    if log[0]:
        who = np.concatenate(log[0])
        when = np.concatenate(log[1])
        what = np.concatenate(log[2])
        order = np.argsort(who, kind="stable")
        who, when, what = who[order], when[order], what[order]
        cuts = np.searchsorted(who, np.arange(n + 1))
    else:
        when = np.zeros(0)
        what = np.zeros(0, dtype=np.int64)
        cuts = np.zeros(n + 1, dtype=np.int64)
    return [
        {
            "index": lo + i,
            "seed": int(seeds[i]),
            "jump_times": when[cuts[i] : cuts[i + 1]].tolist(),
            "outcomes": what[cuts[i] : cuts[i + 1]].tolist(),
        }
        for i in range(n)
    ]


def distribution_distance(empirical, exact):
    """Kolmogorov-Smirnov distance between two laws on the same edges.

    Both arguments only need ``edges`` and ``cdf_at_edges()``, so either
    may be an EnsembleStats or a MixedDistribution; atoms enter as jumps of
    the distribution function.

    Raises
    ------
    GridMismatch
        If the edges differ.
    """
    if empirical.edges.shape != exact.edges.shape or not np.allclose(
        empirical.edges, exact.edges, rtol=0, atol=1e-12
    ):
        raise GridMismatch("distributions use different histogram edges")
    return float(np.max(np.abs(empirical.cdf_at_edges() - exact.cdf_at_edges())))
