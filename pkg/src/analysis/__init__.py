"""Ensemble aggregation and measurement statistics."""

from .ensemble import EnsembleAccumulator, aggregate, compare_to_me
from .measurement import (
    energy_moments_analytic,
    energy_moments_empirical,
    guardian_click_probability,
    tally_guardian_clicks,
)

__all__ = [
    "EnsembleAccumulator",
    "aggregate",
    "compare_to_me",
    "energy_moments_analytic",
    "energy_moments_empirical",
    "guardian_click_probability",
    "tally_guardian_clicks",
]
