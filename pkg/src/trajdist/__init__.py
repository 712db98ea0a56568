"""Distributions of observable expectation values over quantum trajectories."""

__version__ = "0.1.0"

from .analytic import (
    MixedDistribution,
    click_distribution,
    first_moment,
    moment,
    no_click_distribution,
    observable_edges,
    solve_transfer_volterra,
    stationary_moment_diag,
    trajectory_distribution,
    uniform_edges,
)
from .core import (
    MonitoredSystem,
    NonCommutingFamily,
    StateVector,
    TransferSpectrum,
    propagate,
    spectral_decompose,
    transition_matrix,
)
from .lindblad import DensityMatrix, integrate_lindblad, lindblad_step, qubit_bloch_solution, site_density
from .montecarlo import EnsembleStats, TrajectoryRecord, distribution_distance, run_ensemble, sample_trajectory
from .volterra import ConvolutionKernel, VolterraSolution, solve_volterra

__all__ = [
    "ConvolutionKernel",
    "DensityMatrix",
    "EnsembleStats",
    "MixedDistribution",
    "MonitoredSystem",
    "NonCommutingFamily",
    "StateVector",
    "TrajectoryRecord",
    "TransferSpectrum",
    "VolterraSolution",
    "click_distribution",
    "distribution_distance",
    "first_moment",
    "integrate_lindblad",
    "lindblad_step",
    "moment",
    "no_click_distribution",
    "observable_edges",
    "propagate",
    "qubit_bloch_solution",
    "run_ensemble",
    "sample_trajectory",
    "site_density",
    "solve_transfer_volterra",
    "solve_volterra",
    "spectral_decompose",
    "stationary_moment_diag",
    "trajectory_distribution",
    "transition_matrix",
    "uniform_edges",
]
