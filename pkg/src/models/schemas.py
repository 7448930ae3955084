"""Data models and schemas for the quantum-jump / calorimeter simulation."""

import cmath
import math
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_serializer,
    field_validator,
    model_validator,
)


NORM_TOLERANCE = 1e-10
TRACE_TOLERANCE = 1e-10
GRID_TOLERANCE = 1e-9
MAX_SEED = 2**64 - 1
QUBIT_TIME_UNIT = "1/gamma_down(T=0)"


class JumpDirection(str, Enum):
    """Direction of a qubit jump."""
    DOWN = "down"  # qubit -> |g>, detector absorbs ("click-up")
    UP = "up"      # qubit -> |e>, detector emits ("click-down")


class Scheme(str, Enum):
    """Trajectory generation schemes."""
    FIXED_STEP = "fixed"
    WAITING_TIME = "waiting"


class Namespace(str, Enum):
    """Random stream namespaces."""
    TRAJECTORY = "trajectory"
    DIRECTION = "direction"
    CALORIMETER_NOISE = "calorimeter-noise"


# ---------------------------------------------------------------------------
# Model core
# ---------------------------------------------------------------------------

class QubitBathParams(BaseModel):
    """Dimensionless physical configuration of the qubit and its resistive bath."""
    model_config = ConfigDict(frozen=True)

    beta_hw: float = Field(0.5, gt=0, description="beta*hbar*omega_Q; 'inf' flags T=0")
    quality_factor: float = Field(1000.0, gt=0, description="Q = Z0/R")
    e_q_kelvin: float = Field(1.0, gt=0, description="hbar*omega_Q/k_B in kelvin")
    gamma_down_tau: float = Field(1.0, gt=0, description="Gamma_down(T=0) * tau")

    @field_validator("beta_hw", mode="before")
    @classmethod
    def _parse_beta(cls, value: Any) -> Any:
        if isinstance(value, str):
            text = value.strip().lower()
            if text in ("inf", "infinity", "+inf", "zero", "t0"):
                return math.inf
            return float(text)
        return value

    @field_validator("beta_hw", "quality_factor", "e_q_kelvin", "gamma_down_tau")
    @classmethod
    def _reject_nan(cls, value: float) -> float:
        if math.isnan(value):
            raise ValueError("must not be NaN")
        return value

    @field_serializer("beta_hw")
    def _serialize_beta(self, value: float):
        return "inf" if math.isinf(value) else value

    @property
    def is_zero_temperature(self) -> bool:
        return math.isinf(self.beta_hw)

    @property
    def bath_temperature_kelvin(self) -> float:
        """Bath temperature implied by beta_hw and e_q_kelvin (0 at the T=0 flag)."""
        return 0.0 if self.is_zero_temperature else self.e_q_kelvin / self.beta_hw


class Rates(BaseModel):
    """Transition rates in units of omega_Q/Q (so Gamma_down(T=0) = 1)."""
    model_config = ConfigDict(frozen=True)

    gamma_down: float = Field(..., gt=0)
    gamma_up: float = Field(..., ge=0)
    gamma_sigma: float
    delta_gamma: float


# ---------------------------------------------------------------------------
# Trajectory engine
# ---------------------------------------------------------------------------

class PureState(BaseModel):
    """Qubit state a|g> + b|e> with unit norm."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    a: complex
    b: complex

    @field_validator("a", "b", mode="before")
    @classmethod
    def _to_complex(cls, value: Any) -> complex:
        if isinstance(value, (list, tuple)) and len(value) == 2:
            return complex(float(value[0]), float(value[1]))
        return complex(value)

    @model_validator(mode="after")
    def _check_norm(self) -> "PureState":
        norm = abs(self.a) ** 2 + abs(self.b) ** 2
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ValueError(f"state is not normalized: |a|^2+|b|^2 = {norm!r}")
        return self

    @classmethod
    def from_populations(cls, prob_e: float, phase: float = 0.0) -> "PureState":
        """Build sqrt(1-p)|g> + sqrt(p) e^{i phase}|e>."""
        if not 0.0 <= prob_e <= 1.0:
            raise ValueError(f"prob_e must lie in [0, 1], got {prob_e}")
        return cls(a=math.sqrt(1.0 - prob_e), b=math.sqrt(prob_e) * cmath.exp(1j * phase))

    @classmethod
    def ground(cls) -> "PureState":
        return cls(a=1.0, b=0.0)

    @classmethod
    def excited(cls) -> "PureState":
        return cls(a=0.0, b=1.0)

    @property
    def prob_g(self) -> float:
        return abs(self.a) ** 2

    @property
    def prob_e(self) -> float:
        return abs(self.b) ** 2

    @property
    def coherence(self) -> complex:
        """rho_ge = a * conj(b)."""
        return self.a * self.b.conjugate()


class JumpEvent(BaseModel):
    """A single quantum jump."""
    model_config = ConfigDict(frozen=True)

    time: float = Field(..., ge=0)
    direction: JumpDirection


class SampleSeries(BaseModel):
    """Populations and coherence of one trajectory sampled on a time grid."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: np.ndarray
    prob_g: np.ndarray
    prob_e: np.ndarray
    coherence: np.ndarray


class TrajectoryRecord(BaseModel):
    """One stochastic realization of the qubit evolution."""
    model_config = ConfigDict(frozen=True)

    params: QubitBathParams
    initial_state: PureState
    seed: int = Field(..., ge=0, le=MAX_SEED)
    stream_index: int = Field(..., ge=0)
    scheme: Scheme
    t_max: float = Field(..., gt=0)
    dt: Optional[float] = None
    time_unit: str = QUBIT_TIME_UNIT
    events: List[JumpEvent] = Field(default_factory=list)
    samples: Optional[SampleSeries] = None

    @model_validator(mode="after")
    def _check_event_order(self) -> "TrajectoryRecord":
        times = [event.time for event in self.events]
        if any(later <= earlier for earlier, later in zip(times, times[1:])):
            raise ValueError("event times must be strictly increasing")
        return self

    @property
    def first_event(self) -> Optional[JumpEvent]:
        return self.events[0] if self.events else None


# ---------------------------------------------------------------------------
# Master equation / ensemble statistics
# ---------------------------------------------------------------------------

class EnsembleStats(BaseModel):
    """Per-bin trajectory averages J_gg, J_ee, J_ge with standard errors."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: np.ndarray
    j_gg: np.ndarray
    j_ee: np.ndarray
    j_ge: np.ndarray
    se_gg: np.ndarray
    se_ee: np.ndarray
    se_ge: np.ndarray
    n_trajectories: int = Field(..., ge=1)
    params: QubitBathParams
    initial_state: PureState

    @model_validator(mode="after")
    def _check_trace(self) -> "EnsembleStats":
        trace = self.j_gg + self.j_ee
        if trace.size and np.max(np.abs(trace - 1.0)) > TRACE_TOLERANCE:
            raise ValueError("J_gg + J_ee deviates from 1")
        return self


class MEComparisonReport(BaseModel):
    """Deviation of the trajectory average from the closed-form master equation."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    rho_gg: np.ndarray
    rho_ee: np.ndarray
    rho_ge: np.ndarray
    z_scores: np.ndarray
    max_deviation: float
    max_deviation_ge: float
    max_standard_error: float
    fraction_outliers: float
    coherence_decay_rate: Optional[float] = None
    expected_decay_rate: float

    @property
    def within_four_se(self) -> bool:
        return self.max_deviation <= 4.0 * self.max_standard_error


# ---------------------------------------------------------------------------
# Measurement statistics
# ---------------------------------------------------------------------------

class ClickTally(BaseModel):
    """Guardian-photon counts over N repetitions."""

    n: int = Field(..., ge=0)
    n_g: int = Field(0, ge=0, description="click-down count (detector emits, qubit -> |e>)")
    n_e: int = Field(0, ge=0, description="click-up count (detector absorbs, qubit -> |g>)")
    first_click_times: List[float] = Field(default_factory=list)
    t_max: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _check_counts(self) -> "ClickTally":
        if self.n_g + self.n_e > self.n:
            raise ValueError("n_g + n_e cannot exceed n")
        if len(self.first_click_times) != self.n_g + self.n_e:
            raise ValueError("one first-click time is required per click")
        return self

    @property
    def n_silent(self) -> int:
        return self.n - self.n_g - self.n_e

    def merge(self, other: "ClickTally") -> "ClickTally":
        """Combine two tallies (self first, then other)."""
        return ClickTally(
            n=self.n + other.n,
            n_g=self.n_g + other.n_g,
            n_e=self.n_e + other.n_e,
            first_click_times=self.first_click_times + other.first_click_times,
            t_max=max(self.t_max, other.t_max),
        )


class GuardianCheck(BaseModel):
    """Quadrature of the guardian-photon probabilities with analytic references."""
    model_config = ConfigDict(frozen=True)

    p_click_up: float
    p_click_up_analytic: float
    p_click_down: float
    p_click_down_analytic: float
    difference: float
    abs_error_estimate: float


class EnergyMoments(BaseModel):
    """Energy mean and variance in units of hbar*omega_Q and in kelvin."""
    model_config = ConfigDict(frozen=True)

    mean: float
    variance: float
    mean_kelvin: float
    variance_kelvin2: float
    mean_std_error: Optional[float] = None


# ---------------------------------------------------------------------------
# Calorimeter
# ---------------------------------------------------------------------------

class CalorimeterParams(BaseModel):
    """Absorber, superbath and thermometer parameters (time in units of tau)."""
    model_config = ConfigDict(frozen=True)

    c_over_kb: float = Field(100.0, gt=0)
    t0_kelvin: float = Field(0.01, gt=0)
    du: float = Field(0.01, gt=0, le=0.1)
    tau_ratios: List[float] = Field(..., min_length=1, description="tau/tau_th values")
    e_q_kelvin: float = Field(1.0, ge=0)
    window_u: float = Field(5.0, gt=0)
    noise_enabled: bool = True
    equilibrate: bool = True
    thermometer_noise_kelvin: float = Field(0.0, ge=0)

    @field_validator("tau_ratios")
    @classmethod
    def _check_tau_ratios(cls, values: List[float]) -> List[float]:
        for ratio in values:
            if not ratio > 0:
                raise ValueError(f"tau_ratio must be positive, got {ratio}")
        return values

    @model_validator(mode="after")
    def _check_thermometer_stability(self) -> "CalorimeterParams":
        for ratio in self.tau_ratios:
            if ratio * self.du >= 2.0:
                raise ValueError(
                    f"thermometer update unstable: tau_ratio*du = {ratio * self.du} >= 2"
                )
        return self

    @property
    def photon_step_kelvin(self) -> float:
        """Delta T = hbar*omega_Q / C."""
        return self.e_q_kelvin / self.c_over_kb

    @property
    def noise_amplitude(self) -> float:
        """Per-step noise amplitude T0*sqrt(2*du/(C/k_B))."""
        return self.t0_kelvin * math.sqrt(2.0 * self.du / self.c_over_kb)

    @property
    def stationary_variance(self) -> float:
        """Stationary variance of the discrete recursion, (k_B T0^2/C) * 2/(2-du)."""
        return self.noise_amplitude ** 2 / (self.du * (2.0 - self.du))

    @property
    def analytic_snr(self) -> float:
        """(e_q/T0)/sqrt(C/k_B): photon step over continuum equilibrium rms."""
        return (self.e_q_kelvin / self.t0_kelvin) / math.sqrt(self.c_over_kb)

    @property
    def n_steps(self) -> int:
        """Steps until the grid reaches window_u; the last point may lie past it."""
        return int(math.ceil(self.window_u / self.du - GRID_TOLERANCE))


class InjectedEvent(BaseModel):
    """A photon injection applied to the absorber temperature."""
    model_config = ConfigDict(frozen=True)

    u: float = Field(..., ge=0)
    sign: int
    grid_index: int = Field(..., ge=0)


class TemperatureTrace(BaseModel):
    """Absorber temperature and thermometer readings for one trajectory."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    trajectory_index: int = Field(..., ge=0)
    u: np.ndarray
    delta_t: np.ndarray
    theta: Dict[float, np.ndarray]
    events: List[InjectedEvent] = Field(default_factory=list)


class DetectionSummary(BaseModel):
    """Signal-to-noise bookkeeping over a set of detection traces."""

    n_traces: int
    n_traces_with_events: int
    photon_step_kelvin: float
    analytic_snr: float
    expected_noise_rms_kelvin: float
    noise_rms_kelvin: float
    mean_step_kelvin: Optional[float] = None
    ensemble_snr: Optional[float] = None
    per_trace_snr: List[Optional[float]] = Field(default_factory=list)


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

class RngStreamSpec(BaseModel):
    """Identifies one reproducible random stream."""
    model_config = ConfigDict(frozen=True)

    master_seed: int = Field(..., ge=0, le=MAX_SEED)
    namespace: Namespace
    index: int = Field(..., ge=0)


class InitialStateConfig(BaseModel):
    """Prepared superposition sqrt(1-prob_e)|g> + sqrt(prob_e) e^{i phase}|e>."""

    prob_e: float = Field(0.9, ge=0, le=1)
    phase: float = 0.0

    def to_state(self) -> PureState:
        return PureState.from_populations(self.prob_e, self.phase)


class EnsembleConfig(BaseModel):
    """Ensemble size, time window and trajectory scheme."""

    n: int = Field(100, ge=1)
    t_max: float = Field(5.0, gt=0)
    dt: Optional[float] = Field(None, gt=0)
    scheme: Scheme = Scheme.FIXED_STEP
    n_bins: int = Field(200, ge=1)
    chunk_size: int = Field(256, ge=1)
    saved_trajectories: int = Field(10, ge=0)


class RunConfig(BaseModel):
    """Fully resolved configuration of one CLI run."""

    qubit: QubitBathParams = Field(default_factory=QubitBathParams)
    calorimeter: Optional[CalorimeterParams] = None
    initial_state: InitialStateConfig = Field(default_factory=InitialStateConfig)
    ensemble: EnsembleConfig = Field(default_factory=EnsembleConfig)
    seed: int = Field(0, ge=0, le=MAX_SEED)
    output_dir: str = "output"
    temperature_feedback: bool = False
    trajectories_file: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def _inherit_photon_energy(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        calorimeter = data.get("calorimeter")
        qubit = data.get("qubit")
        if isinstance(calorimeter, dict) and "e_q_kelvin" not in calorimeter:
            e_q = qubit.get("e_q_kelvin") if isinstance(qubit, dict) else None
            if isinstance(qubit, QubitBathParams):
                e_q = qubit.e_q_kelvin
            if e_q is not None:
                data = dict(data)
                data["calorimeter"] = {**calorimeter, "e_q_kelvin": e_q}
        return data
