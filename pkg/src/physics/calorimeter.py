"""Absorber temperature under heat-current noise and photon injections.

Time on the calorimeter axis is u = t/tau with tau = C/G_th. The absorber
excess temperature follows the discretized Langevin equation

    dT(u + du) = (1 - du) dT(u) + T0 sqrt(2 du / (C/k_B)) xi

and a thermometer with time constant tau_th reads it through

    theta(u + du) = theta(u) - (tau/tau_th) (theta(u) - dT) du,

where the traces feed dT at the end of the step, after that step's photon
injections.
"""

import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import constants
from scipy.signal import lfilter

from ..models.schemas import (
    GRID_TOLERANCE,
    CalorimeterParams,
    DetectionSummary,
    InjectedEvent,
    JumpDirection,
    JumpEvent,
    PureState,
    QubitBathParams,
    Scheme,
    TemperatureTrace,
    TrajectoryRecord,
)
from ..utils.errors import ConfigurationError, ParameterValidationError
from ..utils.logger import get_logger
from ..utils.rng import TrajectoryStreams
from .rates import rates_at_temperature
from .trajectory import DEFAULT_DT_FACTOR, no_jump_populations

logger = get_logger(__name__)

ArrayLike = Union[float, np.ndarray]

TEMPERATURE_FLOOR_FRACTION = 1e-6


def step_temperature(delta_t: ArrayLike, params: CalorimeterParams, xi: ArrayLike) -> ArrayLike:
    """
    Advance the absorber excess temperature by one step du.

    Args:
        delta_t: dT(u) in kelvin
        params: Calorimeter parameters
        xi: Standard normal draw(s)

    Returns:
        dT(u + du) in kelvin
    """
    return (1.0 - params.du) * delta_t + params.noise_amplitude * xi


def inject_photon(delta_t: ArrayLike, sign: int, params: CalorimeterParams) -> ArrayLike:
    """
    Apply the sudden temperature change of one photon, sign * e_q/C.

    sign is +1 when the absorber takes a photon from the qubit (qubit -> |g>)
    and -1 when it gives one (qubit -> |e>).
    """
    if sign not in (1, -1):
        raise ParameterValidationError(f"sign must be +1 or -1, got {sign}")
    return delta_t + sign * params.photon_step_kelvin


def thermometer_step(
    theta: ArrayLike,
    delta_t: ArrayLike,
    params: CalorimeterParams,
    tau_ratio: ArrayLike,
    xi: ArrayLike = 0.0,
) -> ArrayLike:
    """
    Advance the thermometer reading by one step du.

    Args:
        theta: Thermometer reading(s) theta(u) in kelvin
        delta_t: Absorber excess temperature dT(u) in kelvin
        params: Calorimeter parameters
        tau_ratio: tau/tau_th, scalar or one value per reading
        xi: Standard normal draw(s) for the thermometer noise term, which is
            only active when params.thermometer_noise_kelvin > 0

    Returns:
        theta(u + du)
    """
    ratio = np.asarray(tau_ratio, dtype=float)
    if np.any(ratio * params.du >= 2.0):
        raise ConfigurationError(f"thermometer update unstable for tau_ratio={tau_ratio}, du={params.du}")
    updated = theta - ratio * (theta - delta_t) * params.du
    if params.thermometer_noise_kelvin > 0:
        updated = updated + params.thermometer_noise_kelvin * math.sqrt(params.du) * xi
    return updated


def heat_capacity_over_kb(gamma_sommerfeld: float, volume_m3: float, t0_kelvin: float) -> float:
    """
    Electronic heat capacity C/k_B = gamma V T0 / k_B of a metallic absorber.

    Args:
        gamma_sommerfeld: Sommerfeld coefficient in J m^-3 K^-2
        volume_m3: Absorber volume in m^3
        t0_kelvin: Temperature in kelvin

    Returns:
        Dimensionless heat capacity
    """
    return gamma_sommerfeld * volume_m3 * t0_kelvin / constants.k


def u_grid(params: CalorimeterParams) -> np.ndarray:
    return np.arange(params.n_steps + 1) * params.du


def _grid_index(u: float, params: CalorimeterParams) -> int:
    """First grid point at or after u."""
    return max(0, int(math.ceil(u / params.du - GRID_TOLERANCE)))


def injections_from_record(
    record: TrajectoryRecord,
    params: CalorimeterParams,
) -> List[InjectedEvent]:
    """
    Map a trajectory's jumps onto the calorimeter grid.

    Raises:
        ParameterValidationError: If a jump falls after the simulated window
    """
    injected = []
    for event in record.events:
        u = event.time / record.params.gamma_down_tau
        index = _grid_index(u, params)
        if index > params.n_steps:
            raise ParameterValidationError(
                f"jump at u={u:.6g} lies outside the simulated window [0, {params.n_steps * params.du:.6g}]"
            )
        sign = 1 if event.direction == JumpDirection.DOWN else -1
        injected.append(InjectedEvent(u=u, sign=sign, grid_index=index))
    return injected


def _initial_temperature(params: CalorimeterParams, rng: np.random.Generator) -> float:
    if params.noise_enabled and params.equilibrate:
        return math.sqrt(params.stationary_variance) * float(rng.standard_normal())
    return 0.0


def simulate_detection(
    record: TrajectoryRecord,
    params: CalorimeterParams,
    rng: np.random.Generator,
    trajectory_index: Optional[int] = None,
) -> TemperatureTrace:
    """
    Simulate the absorber temperature and thermometer readings for one trajectory.

    Draw order on the noise stream: the equilibrium start value, then one
    normal per step, then (only with thermometer noise) one per step and
    tau_ratio.

    Args:
        record: Qubit trajectory whose jumps are converted via u = t/gamma_down_tau
        params: Calorimeter parameters
        rng: Noise stream of this trace
        trajectory_index: Index recorded on the trace (defaults to the record's)

    Returns:
        TemperatureTrace on u = 0, du, ..., n_steps*du (first grid point >= window_u)
    """
    injected = injections_from_record(record, params)
    n_steps = params.n_steps
    ratios = np.asarray(params.tau_ratios, dtype=float)

    initial = _initial_temperature(params, rng)
    xi = rng.standard_normal(n_steps) if params.noise_enabled else np.zeros(n_steps)
    if params.thermometer_noise_kelvin > 0:
        xi_th = rng.standard_normal((n_steps, ratios.size))
    else:
        xi_th = np.zeros((n_steps, ratios.size))

    kicks = np.zeros(n_steps + 1, dtype=int)
    for event in injected:
        kicks[event.grid_index] += event.sign

    delta_t = np.empty(n_steps + 1)
    theta = np.empty((n_steps + 1, ratios.size))

    current = initial
    for _ in range(abs(kicks[0])):
        current = inject_photon(current, int(np.sign(kicks[0])), params)
    delta_t[0] = current
    theta[0] = current

    for k in range(1, n_steps + 1):
        current = step_temperature(delta_t[k - 1], params, xi[k - 1])
        for _ in range(abs(kicks[k])):
            current = inject_photon(current, int(np.sign(kicks[k])), params)
        delta_t[k] = current
        theta[k] = thermometer_step(theta[k - 1], delta_t[k], params, ratios, xi_th[k - 1])

    return TemperatureTrace(
        trajectory_index=record.stream_index if trajectory_index is None else trajectory_index,
        u=u_grid(params),
        delta_t=delta_t,
        theta={float(ratio): theta[:, i].copy() for i, ratio in enumerate(ratios)},
        events=injected,
    )


def equilibrium_trace(params: CalorimeterParams, rng: np.random.Generator, n_steps: int) -> np.ndarray:
    """
    Long noise-only absorber trace, started from the stationary distribution.

    The linear recursion is run as an IIR filter, so 1e6 steps take milliseconds.

    Returns:
        dT at n_steps + 1 grid points
    """
    initial = _initial_temperature(params, rng)
    drive = params.noise_amplitude * rng.standard_normal(n_steps)
    decay = 1.0 - params.du
    body, _ = lfilter([1.0], [1.0, -decay], drive, zi=[decay * initial])
    return np.concatenate(([initial], body))


def photon_response(trace: TemperatureTrace, params: CalorimeterParams) -> np.ndarray:
    """Deterministic part of dT: each injection decaying as (1 - du)^n."""
    response = np.zeros(trace.delta_t.shape)
    steps = np.arange(response.size)
    for event in trace.events:
        after = steps >= event.grid_index
        response[after] += event.sign * params.photon_step_kelvin * (1.0 - params.du) ** (
            steps[after] - event.grid_index
        )
    return response


def step_heights(trace: TemperatureTrace, params: CalorimeterParams) -> List[float]:
    """Signed recursion residual dT[k] - (1 - du) dT[k-1] at each injection."""
    heights = []
    for event in trace.events:
        k = event.grid_index
        if k == 0:
            residual = trace.delta_t[0]
        else:
            residual = trace.delta_t[k] - (1.0 - params.du) * trace.delta_t[k - 1]
        heights.append(float(event.sign * residual))
    return heights


def summarize_detection(traces: Sequence[TemperatureTrace], params: CalorimeterParams) -> DetectionSummary:
    """
    Signal-to-noise statistics over detection traces.

    The noise rms is pooled over all traces after removing the photon
    response, with a known zero mean. The ensemble SNR is the mean step
    height over the pooled rms.

    Args:
        traces: Detection traces
        params: Calorimeter parameters

    Returns:
        DetectionSummary
    """
    if not traces:
        raise ParameterValidationError("no detection traces to summarize")

    sum_sq = 0.0
    count = 0
    all_heights: List[float] = []
    per_trace: List[Optional[float]] = []
    per_trace_rms = []
    for trace in traces:
        noise = trace.delta_t - photon_response(trace, params)
        sum_sq += float(np.dot(noise, noise))
        count += noise.size
        per_trace_rms.append(math.sqrt(float(np.mean(noise ** 2))))
        all_heights.extend(step_heights(trace, params))

    pooled_rms = math.sqrt(sum_sq / count)
    for trace, rms in zip(traces, per_trace_rms):
        heights = step_heights(trace, params)
        if heights and rms > 0:
            per_trace.append(float(np.mean(heights)) / rms)
        else:
            per_trace.append(None)

    mean_step = float(np.mean(all_heights)) if all_heights else None
    ensemble_snr = mean_step / pooled_rms if mean_step is not None and pooled_rms > 0 else None

    summary = DetectionSummary(
        n_traces=len(traces),
        n_traces_with_events=sum(1 for trace in traces if trace.events),
        photon_step_kelvin=params.photon_step_kelvin,
        analytic_snr=params.analytic_snr,
        expected_noise_rms_kelvin=math.sqrt(params.stationary_variance) if params.noise_enabled else 0.0,
        noise_rms_kelvin=pooled_rms,
        mean_step_kelvin=mean_step,
        ensemble_snr=ensemble_snr,
        per_trace_snr=per_trace,
    )
    logger.info(
        f"Detection: {summary.n_traces_with_events}/{summary.n_traces} traces with photons, "
        f"noise rms={pooled_rms:.3e} K, SNR={ensemble_snr} (analytic {params.analytic_snr:.3f})"
    )
    return summary


def simulate_coupled_detection(
    qubit: QubitBathParams,
    state0: PureState,
    params: CalorimeterParams,
    streams: TrajectoryStreams,
    noise_rng: np.random.Generator,
) -> Tuple[TrajectoryRecord, TemperatureTrace]:
    """
    Run qubit and absorber together with rates following the absorber temperature.

    Each calorimeter step is split into qubit sub-steps no longer than
    0.01/Gamma_sigma(T0 + dT); the rates are re-evaluated at every step from
    T = max(T0 + dT, 1e-6 T0). Jumps are injected at the end of the
    calorimeter step in which they occur.

    Args:
        qubit: Qubit/bath parameters (e_q_kelvin and gamma_down_tau are used)
        state0: Prepared qubit state
        params: Calorimeter parameters
        streams: Jump and direction streams of the trajectory
        noise_rng: Noise stream of the trace

    Returns:
        (TrajectoryRecord, TemperatureTrace)
    """
    n_steps = params.n_steps
    ratios = np.asarray(params.tau_ratios, dtype=float)
    floor = TEMPERATURE_FLOOR_FRACTION * params.t0_kelvin
    dt_per_step = params.du * qubit.gamma_down_tau

    initial = _initial_temperature(params, noise_rng)
    xi = noise_rng.standard_normal(n_steps) if params.noise_enabled else np.zeros(n_steps)
    if params.thermometer_noise_kelvin > 0:
        xi_th = noise_rng.standard_normal((n_steps, ratios.size))
    else:
        xi_th = np.zeros((n_steps, ratios.size))

    delta_t = np.empty(n_steps + 1)
    theta = np.empty((n_steps + 1, ratios.size))
    delta_t[0] = initial
    theta[0] = initial

    events: List[JumpEvent] = []
    injected: List[InjectedEvent] = []
    prob_e = state0.prob_e
    t_now = 0.0

    for k in range(1, n_steps + 1):
        temperature = max(params.t0_kelvin + delta_t[k - 1], floor)
        rates = rates_at_temperature(qubit, temperature)
        n_sub = max(1, math.ceil(dt_per_step * rates.gamma_sigma / DEFAULT_DT_FACTOR - GRID_TOLERANCE))
        dt = dt_per_step / n_sub

        kick = 0
        for _ in range(n_sub):
            _, prob_e_next = no_jump_populations(prob_e, rates, dt)
            dp_down = rates.gamma_down * prob_e * dt
            dp = dp_down + rates.gamma_up * (1.0 - prob_e) * dt
            t_now += dt
            if streams.jump.random() < dp:
                if streams.direction.random() < dp_down / dp:
                    direction, prob_e = JumpDirection.DOWN, 0.0
                    kick += 1
                else:
                    direction, prob_e = JumpDirection.UP, 1.0
                    kick -= 1
                events.append(JumpEvent(time=t_now, direction=direction))
                injected.append(InjectedEvent(
                    u=t_now / qubit.gamma_down_tau,
                    sign=1 if direction == JumpDirection.DOWN else -1,
                    grid_index=k,
                ))
            else:
                prob_e = float(prob_e_next)

        current = step_temperature(delta_t[k - 1], params, xi[k - 1])
        for _ in range(abs(kick)):
            current = inject_photon(current, 1 if kick > 0 else -1, params)
        delta_t[k] = current
        theta[k] = thermometer_step(theta[k - 1], delta_t[k], params, ratios, xi_th[k - 1])

    record = TrajectoryRecord(
        params=qubit,
        initial_state=state0,
        seed=streams.seed,
        stream_index=streams.index,
        scheme=Scheme.FIXED_STEP,
        t_max=n_steps * dt_per_step,
        events=events,
    )
    trace = TemperatureTrace(
        trajectory_index=streams.index,
        u=u_grid(params),
        delta_t=delta_t,
        theta={float(ratio): theta[:, i].copy() for i, ratio in enumerate(ratios)},
        events=injected,
    )
    return record, trace


def thermometer_tracking(trace: TemperatureTrace) -> Dict[float, Dict[str, float]]:
    """Per tau_ratio: max |theta - dT| and the total excursion of theta."""
    result = {}
    for ratio, theta in trace.theta.items():
        result[ratio] = {
            "max_abs_deviation_kelvin": float(np.max(np.abs(theta - trace.delta_t))),
            "excursion_kelvin": float(np.max(theta) - np.min(theta)),
        }
    return result
