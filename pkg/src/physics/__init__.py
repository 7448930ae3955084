"""Qubit-bath rates, trajectories, master equation and calorimeter response."""

from .rates import compute_rates, spectral_density
from .master_equation import me_solution
from .trajectory import no_jump_evolve, simulate, simulate_trajectory, survival_probability
from .calorimeter import inject_photon, simulate_detection, step_temperature, thermometer_step

__all__ = [
    "compute_rates",
    "spectral_density",
    "me_solution",
    "no_jump_evolve",
    "simulate",
    "simulate_trajectory",
    "survival_probability",
    "inject_photon",
    "simulate_detection",
    "step_temperature",
    "thermometer_step",
]
