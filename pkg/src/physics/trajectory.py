"""Quantum-jump trajectories: renormalized no-jump evolution plus sampled jumps."""

import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logit

from ..models.schemas import (
    JumpDirection,
    JumpEvent,
    PureState,
    QubitBathParams,
    Rates,
    SampleSeries,
    Scheme,
    TrajectoryRecord,
)
from ..utils.errors import ConfigurationError, ParameterValidationError
from ..utils.logger import get_logger
from ..utils.rng import TrajectoryStreams
from .rates import compute_rates

logger = get_logger(__name__)

ArrayLike = Union[float, np.ndarray]

DEFAULT_DT_FACTOR = 0.01
SCAN_WINDOW = 1024


def default_dt(rates: Rates) -> float:
    """Default fixed step, 0.01/Gamma_sigma."""
    return DEFAULT_DT_FACTOR / rates.gamma_sigma


def _phase(amplitude: complex) -> complex:
    magnitude = abs(amplitude)
    return amplitude / magnitude if magnitude > 0 else 1.0 + 0j


def no_jump_populations(prob_e0: float, rates: Rates, t: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """
    Populations (|a(t)|^2, |b(t)|^2) conditioned on no jump up to t.

    |b(t)|^2 = |b0|^2 e^{-G_down t} / P_no-jump(t), evaluated as
    expit(logit(|b0|^2) - dGamma t) so that long times do not underflow.

    Args:
        prob_e0: Initial excited population |b(0)|^2
        rates: Transition rates
        t: Elapsed time(s) since the state was prepared

    Returns:
        (prob_g, prob_e) with the shape of t
    """
    x = logit(prob_e0) - rates.delta_gamma * np.asarray(t, dtype=float)
    return expit(-x), expit(x)


def survival_probability(state0: PureState, rates: Rates, t: ArrayLike) -> ArrayLike:
    """
    Probability that no jump occurs in [0, t].

    P_no-jump(t) = |a0|^2 e^{-G_up t} + |b0|^2 e^{-G_down t}

    Args:
        state0: State at the start of the interval
        rates: Transition rates
        t: Time or array of times, t >= 0

    Returns:
        Survival probability with the shape of t
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ParameterValidationError("t must be non-negative")
    result = _survival(state0.prob_e, rates, t_arr)
    return float(result) if t_arr.ndim == 0 else result


def _survival(prob_e0: float, rates: Rates, t: ArrayLike) -> ArrayLike:
    return (1.0 - prob_e0) * np.exp(-rates.gamma_up * t) + prob_e0 * np.exp(-rates.gamma_down * t)


def no_jump_evolve(state0: PureState, rates: Rates, t: float) -> PureState:
    """
    Evolve a state for time t assuming no jump occurs.

    Only the magnitudes change; the phases of a and b are kept (the global
    dynamical phase is dropped).

    Args:
        state0: Normalized initial state
        rates: Transition rates
        t: Elapsed time, t >= 0

    Returns:
        Normalized state at time t
    """
    if t < 0:
        raise ParameterValidationError(f"t must be non-negative, got {t}")
    if t == 0:
        return state0

    prob_g, prob_e = no_jump_populations(state0.prob_e, rates, t)
    return PureState(
        a=math.sqrt(float(prob_g)) * _phase(state0.a),
        b=math.sqrt(float(prob_e)) * _phase(state0.b),
    )


def _post_jump_prob_e(direction: JumpDirection) -> float:
    return 0.0 if direction == JumpDirection.DOWN else 1.0


def simulate_trajectory(
    params: QubitBathParams,
    state0: PureState,
    t_max: float,
    dt: Optional[float],
    rng_stream: TrajectoryStreams,
    sample_grid: Optional[Sequence[float]] = None,
) -> TrajectoryRecord:
    """
    Generate one trajectory with the fixed-step scheme.

    Step i draws one uniform u_i from the jump stream; a jump happens when
    u_i < dp = (G_down|b|^2 + G_up|a|^2) dt, and a second draw from the
    direction stream picks down with probability dp_down/dp. Jumps are stamped
    at the end of their step. The no-jump state between events is evaluated
    in closed form, so windows of steps are tested at once.

    Args:
        params: Qubit/bath parameters
        state0: Prepared state
        t_max: Trajectory length (units 1/Gamma_down(T=0))
        dt: Step length; None selects 0.01/Gamma_sigma
        rng_stream: Jump and direction streams of this trajectory
        sample_grid: Optional times at which to attach populations

    Returns:
        TrajectoryRecord with all events

    Raises:
        ConfigurationError: If dt exceeds 0.01/Gamma_sigma or t_max <= 0
    """
    rates = compute_rates(params)
    max_dt = default_dt(rates)
    if dt is None:
        dt = max_dt
    elif dt <= 0 or dt > max_dt * (1.0 + 1e-12):
        raise ConfigurationError(f"dt = {dt} must lie in (0, 0.01/Gamma_sigma = {max_dt}]")
    if t_max <= 0:
        raise ConfigurationError(f"t_max must be positive, got {t_max}")

    n_steps = int(math.floor(t_max / dt + 1e-9))
    uniforms = rng_stream.jump.random(n_steps)

    events = []
    segment_start = 0
    prob_e_start = state0.prob_e
    step = 0
    while step < n_steps:
        stop = min(step + SCAN_WINDOW, n_steps)
        elapsed = (np.arange(step, stop) - segment_start) * dt
        prob_g, prob_e = no_jump_populations(prob_e_start, rates, elapsed)
        dp_down = rates.gamma_down * prob_e * dt
        dp = dp_down + rates.gamma_up * prob_g * dt

        hits = np.flatnonzero(uniforms[step:stop] < dp)
        if hits.size == 0:
            step = stop
            continue

        hit = int(hits[0])
        jump_step = step + hit
        if rng_stream.direction.random() < dp_down[hit] / dp[hit]:
            direction = JumpDirection.DOWN
        else:
            direction = JumpDirection.UP
        events.append(JumpEvent(time=(jump_step + 1) * dt, direction=direction))

        prob_e_start = _post_jump_prob_e(direction)
        segment_start = step = jump_step + 1

    record = TrajectoryRecord(
        params=params,
        initial_state=state0,
        seed=rng_stream.seed,
        stream_index=rng_stream.index,
        scheme=Scheme.FIXED_STEP,
        t_max=t_max,
        dt=dt,
        events=events,
    )
    if sample_grid is not None:
        record = record.model_copy(update={"samples": sample_record(record, sample_grid)})
    return record


def simulate_trajectory_waiting_time(
    params: QubitBathParams,
    state0: PureState,
    t_max: float,
    rng_stream: TrajectoryStreams,
    sample_grid: Optional[Sequence[float]] = None,
) -> TrajectoryRecord:
    """
    Generate one trajectory by sampling waiting times from P_no-jump.

    Each jump consumes one uniform u from the jump stream; the jump time solves
    P_no-jump(t*) = u (bracketed root finding, tolerance 1e-12/Gamma_sigma)
    and one draw from the direction stream picks down with probability
    G_down|b(t*)|^2 / (G_down|b(t*)|^2 + G_up|a(t*)|^2). When u is not
    reached inside the window (always the case for u <= P_no-jump(inf) at
    T=0) the trajectory ends.

    Args:
        params: Qubit/bath parameters
        state0: Prepared state
        t_max: Trajectory length (units 1/Gamma_down(T=0))
        rng_stream: Jump and direction streams of this trajectory
        sample_grid: Optional times at which to attach populations

    Returns:
        TrajectoryRecord with all events
    """
    if t_max <= 0:
        raise ConfigurationError(f"t_max must be positive, got {t_max}")
    rates = compute_rates(params)
    xtol = 1e-12 / rates.gamma_sigma

    events = []
    t_now = 0.0
    prob_e_now = state0.prob_e
    while True:
        u = 1.0 - rng_stream.jump.random()
        remaining = t_max - t_now
        if remaining <= 0 or _survival(prob_e_now, rates, remaining) >= u:
            break

        waiting = brentq(
            lambda s, p=prob_e_now: _survival(p, rates, s) - u,
            0.0, remaining, xtol=xtol,
        )
        if waiting <= 0.0:
            waiting = np.finfo(float).eps * max(1.0, t_now)

        prob_g, prob_e = no_jump_populations(prob_e_now, rates, waiting)
        weight_down = rates.gamma_down * float(prob_e)
        weight_up = rates.gamma_up * float(prob_g)
        if rng_stream.direction.random() < weight_down / (weight_down + weight_up):
            direction = JumpDirection.DOWN
        else:
            direction = JumpDirection.UP

        t_now += waiting
        events.append(JumpEvent(time=t_now, direction=direction))
        prob_e_now = _post_jump_prob_e(direction)

    record = TrajectoryRecord(
        params=params,
        initial_state=state0,
        seed=rng_stream.seed,
        stream_index=rng_stream.index,
        scheme=Scheme.WAITING_TIME,
        t_max=t_max,
        events=events,
    )
    if sample_grid is not None:
        record = record.model_copy(update={"samples": sample_record(record, sample_grid)})
    return record


def simulate(
    params: QubitBathParams,
    state0: PureState,
    t_max: float,
    rng_stream: TrajectoryStreams,
    scheme: Scheme = Scheme.FIXED_STEP,
    dt: Optional[float] = None,
    sample_grid: Optional[Sequence[float]] = None,
) -> TrajectoryRecord:
    """Dispatch to the requested trajectory scheme."""
    if scheme == Scheme.FIXED_STEP:
        return simulate_trajectory(params, state0, t_max, dt, rng_stream, sample_grid=sample_grid)
    if scheme == Scheme.WAITING_TIME:
        return simulate_trajectory_waiting_time(params, state0, t_max, rng_stream, sample_grid=sample_grid)
    raise ConfigurationError(f"Unknown scheme: {scheme}")


def sample_record(record: TrajectoryRecord, grid: Sequence[float]) -> SampleSeries:
    """
    Evaluate a trajectory's populations and coherence on a time grid.

    Before the first event the closed-form no-jump evolution of the prepared
    state is used; after an event the state is the eigenstate it jumped to
    (a fixed point of the no-jump map, with zero coherence).

    Args:
        record: Trajectory record
        grid: Sample times in [0, t_max]

    Returns:
        SampleSeries on the grid
    """
    rates = compute_rates(record.params)
    grid = np.asarray(grid, dtype=float)
    state0 = record.initial_state

    prob_g = np.empty(grid.shape)
    prob_e = np.empty(grid.shape)
    coherence = np.zeros(grid.shape, dtype=complex)

    times = np.array([event.time for event in record.events], dtype=float)
    n_before = np.searchsorted(times, grid, side="right")

    free = n_before == 0
    if np.any(free):
        free_g, free_e = no_jump_populations(state0.prob_e, rates, grid[free])
        prob_g[free] = free_g
        prob_e[free] = free_e
        coherence[free] = np.sqrt(free_g * free_e) * _phase(state0.a) * np.conj(_phase(state0.b))

    if record.events:
        excited_after = np.array(
            [event.direction == JumpDirection.UP for event in record.events], dtype=bool
        )
        jumped = ~free
        last = excited_after[n_before[jumped] - 1]
        prob_e[jumped] = np.where(last, 1.0, 0.0)
        prob_g[jumped] = np.where(last, 0.0, 1.0)

    return SampleSeries(t=grid, prob_g=prob_g, prob_e=prob_e, coherence=coherence)
