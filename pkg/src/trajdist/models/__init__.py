"""Closed-form results for the monitored qubit and the hopping particle."""

from ..special import bessel_J, bessel_J_sequence, bessel_generating, normalized_bessel_sequence
from .hopping import (
    HoppingParams,
    NegativeMass,
    dispersion,
    hopping_click_mass,
    hopping_Ik,
    hopping_qm_moment,
    hopping_second_moment,
    hopping_site_density,
    hopping_system,
    ring_size,
)
from .qubit import (
    QubitParams,
    StationaryUndefinedAtZeroRate,
    qubit_click_density,
    qubit_I,
    qubit_second_moment,
    qubit_stationary_cdf,
    qubit_stationary_density,
    qubit_stationary_even_moment,
    qubit_system,
)

__all__ = [
    "bessel_J",
    "bessel_J_sequence",
    "bessel_generating",
    "normalized_bessel_sequence",
    "HoppingParams",
    "NegativeMass",
    "dispersion",
    "hopping_click_mass",
    "hopping_Ik",
    "hopping_qm_moment",
    "hopping_second_moment",
    "hopping_site_density",
    "hopping_system",
    "ring_size",
    "QubitParams",
    "StationaryUndefinedAtZeroRate",
    "qubit_click_density",
    "qubit_I",
    "qubit_second_moment",
    "qubit_stationary_cdf",
    "qubit_stationary_density",
    "qubit_stationary_even_moment",
    "qubit_system",
]
