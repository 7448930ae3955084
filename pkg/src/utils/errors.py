"""Exception types shared across the simulation package."""

from typing import Optional


class ParameterValidationError(ValueError):
    """A physical parameter or initial condition is out of its allowed range."""


class ConfigurationError(ValueError):
    """A run configuration is invalid (bad field, unstable step size, ...)."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class SimulationError(RuntimeError):
    """A trajectory or detection trace failed while running."""

    def __init__(self, message: str, stream_index: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.stream_index = stream_index

    def __reduce__(self):
        # Keep stream_index when the error crosses a process boundary
        return (type(self), (self.message, self.stream_index))

    def __str__(self) -> str:
        if self.stream_index is None:
            return self.message
        return f"[stream {self.stream_index}] {self.message}"
