"""Shared test fixtures for the quantum-jump calorimetry test suite."""

import math

import pytest

from src.models.schemas import (
    CalorimeterParams,
    JumpDirection,
    JumpEvent,
    PureState,
    QubitBathParams,
    RunConfig,
    Scheme,
    TrajectoryRecord,
)
from src.physics.rates import compute_rates
from src.utils.rng import StreamFactory


# ---------------------------------------------------------------------------
# Reference parameter sets
# ---------------------------------------------------------------------------

BETA_SWEEP = [0.1, 0.5, 1.0, 2.0, 5.0]

# beta*hbar*omega_Q = 0.5
GAMMA_DOWN_HALF = 1.0 / (1.0 - math.exp(-0.5))
GAMMA_UP_HALF = math.exp(-0.5) * GAMMA_DOWN_HALF

# Absorber with e_q/T0 = 100 and C/k_B = 100
REFERENCE_CALORIMETER = {
    "c_over_kb": 100.0,
    "t0_kelvin": 0.01,
    "du": 0.01,
    "e_q_kelvin": 1.0,
    "window_u": 5.0,
}


def _make_record(events=(), params=None, state=None, t_max=5.0, index=0):
    """Build a TrajectoryRecord from (time, direction) pairs."""
    return TrajectoryRecord(
        params=params or QubitBathParams(beta_hw=math.inf),
        initial_state=state or PureState.from_populations(0.9),
        seed=0,
        stream_index=index,
        scheme=Scheme.FIXED_STEP,
        t_max=t_max,
        dt=0.01,
        events=[JumpEvent(time=time, direction=JumpDirection(direction)) for time, direction in events],
    )


def _make_calorimeter(**overrides):
    values = {**REFERENCE_CALORIMETER, "tau_ratios": [100.0, 1.0, 0.01]}
    values.update(overrides)
    return CalorimeterParams(**values)


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

@pytest.fixture
def zero_temperature_params():
    return QubitBathParams(beta_hw=math.inf)


@pytest.fixture
def finite_temperature_params():
    return QubitBathParams(beta_hw=0.5)


@pytest.fixture
def finite_temperature_rates(finite_temperature_params):
    return compute_rates(finite_temperature_params)


@pytest.fixture
def zero_temperature_rates(zero_temperature_params):
    return compute_rates(zero_temperature_params)


@pytest.fixture
def excited_superposition():
    """|b(0)|^2 = 0.9, real amplitudes."""
    return PureState.from_populations(0.9)


@pytest.fixture
def stream_factory():
    return StreamFactory(master_seed=20240607)


@pytest.fixture
def calorimeter_params():
    return _make_calorimeter()


@pytest.fixture
def quiet_calorimeter():
    """Noise-free absorber with a long window."""
    return _make_calorimeter(noise_enabled=False, window_u=20.0)


@pytest.fixture
def run_config(tmp_path):
    """Small finite-temperature run writing into a temporary directory."""
    return RunConfig.model_validate({
        "qubit": {"beta_hw": 0.5},
        "initial_state": {"prob_e": 0.9},
        "ensemble": {"n": 40, "t_max": 3.0, "n_bins": 30, "chunk_size": 16, "saved_trajectories": 3},
        "seed": 7,
        "output_dir": str(tmp_path / "out"),
    })
