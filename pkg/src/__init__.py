"""Quantum-Jump Calorimetry - qubit trajectories, guardian photons and absorber response"""

__version__ = "0.1.0"
