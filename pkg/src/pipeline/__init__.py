"""Parallel ensemble execution."""

from .ensemble_runner import EnsembleResult, EnsembleRunner

__all__ = ["EnsembleResult", "EnsembleRunner"]
