"""Monitored qubit: how the spread of <sigma_z> settles as the click rate grows.

Run with ``python demos/qubit_distribution.py``. For a few measurement rates
the script builds the exact distribution at a late time, checks it against a
Monte Carlo ensemble and prints the stationary second moment next to the
time-dependent one.
"""

import numpy as np

from trajdist import distribution_distance, observable_edges, run_ensemble, trajectory_distribution
from trajdist.models import QubitParams, qubit_second_moment, qubit_stationary_even_moment, qubit_system

T = 20.0
N_TRAJ = 20000

print(f"{'gamma':>6} {'m2(t)':>10} {'m2 stationary':>14} {'P(no click)':>12} {'KS vs MC':>9}")
for gamma in (0.2, 1.0, 5.0):
    params = QubitParams(omega=1.0, gamma=gamma)
    system = qubit_system(params)
    edges = observable_edges(system, bins=400)
    dist, _, _ = trajectory_distribution(system, T, edges)
    ens = run_ensemble(system, T, N_TRAJ, base_seed=11, workers=2, edges=edges)
    ks = distribution_distance(ens, dist)
    print(
        f"{gamma:6.2f} {qubit_second_moment(params, T):10.5f} "
        f"{qubit_stationary_even_moment(params, 2):14.5f} "
        f"{dist.atom_weights.sum():12.3e} {ks:9.4f}"
    )

# The density piles up near +-1 when clicks are frequent (quantum Zeno freezing)
# and spreads across [-1, 1] when the qubit oscillates freely between clicks.
params = QubitParams(1.0, 5.0)
dist, _, _ = trajectory_distribution(qubit_system(params), T, observable_edges(qubit_system(params), 20))
print("\nhistogram of <sigma_z> at gamma = 5:")
for lo, d in zip(dist.edges[:-1], dist.density):
    print(f"  {lo:+.2f} {'#' * int(np.ceil(40 * d / dist.density.max()))}")
