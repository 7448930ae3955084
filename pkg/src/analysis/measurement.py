"""Guardian-photon click statistics and energy bookkeeping.

Naming follows the detector's point of view: a qubit relaxing to |g> gives
its photon to the absorber ("click-up"), a qubit excited to |e> takes one
from it ("click-down").
"""

import math
from typing import Any, Dict, List, Sequence

import numpy as np
from scipy.integrate import quad

from ..models.schemas import (
    ClickTally,
    EnergyMoments,
    GuardianCheck,
    JumpDirection,
    PureState,
    Rates,
    TrajectoryRecord,
)
from ..physics.trajectory import no_jump_populations, survival_probability
from ..utils.errors import ParameterValidationError, QuadratureError
from ..utils.logger import get_event_logger, get_logger

logger = get_logger(__name__)

QUAD_TOLERANCE = 1e-9
CUTOFF_DECAY_TIMES = 40.0
E_GROUND = -0.5
E_EXCITED = 0.5


def _integrate_first_jump(integrand, decay_rate: float) -> tuple:
    """Integrate a single-exponential-tailed density over [0, inf)."""
    cutoff = CUTOFF_DECAY_TIMES / decay_rate
    result = quad(integrand, 0.0, cutoff, epsabs=QUAD_TOLERANCE / 10, epsrel=1e-11, limit=200, full_output=1)
    if len(result) > 3:
        raise QuadratureError(f"quadrature did not converge: {result[3]}")
    value, abs_error = result[0], result[1]
    if abs_error > QUAD_TOLERANCE:
        raise QuadratureError(f"quadrature error estimate {abs_error} exceeds {QUAD_TOLERANCE}")
    # the integrand decays as e^{-decay_rate t} beyond the cutoff
    tail = integrand(cutoff) / decay_rate
    return value + tail, abs_error


def guardian_click_probability(state0: PureState, rates: Rates) -> GuardianCheck:
    """
    Probability that the first photon is absorbed by the detector.

    Integrates P_no-jump(t) * G_down |b(t)|^2 over [0, inf) by adaptive
    quadrature, and likewise P_no-jump(t) * G_up |a(t)|^2 for the first photon
    being emitted by the detector.

    Args:
        state0: Prepared state
        rates: Transition rates

    Returns:
        GuardianCheck with the quadrature values, the analytic |b(0)|^2 and
        |a(0)|^2 (0 at T=0) and the click-up difference
    """
    prob_e0 = state0.prob_e

    def click_up_density(t: float) -> float:
        _, prob_e = no_jump_populations(prob_e0, rates, t)
        return survival_probability(state0, rates, t) * rates.gamma_down * float(prob_e)

    def click_down_density(t: float) -> float:
        prob_g, _ = no_jump_populations(prob_e0, rates, t)
        return survival_probability(state0, rates, t) * rates.gamma_up * float(prob_g)

    p_up, err_up = _integrate_first_jump(click_up_density, rates.gamma_down)
    if rates.gamma_up > 0:
        p_down, err_down = _integrate_first_jump(click_down_density, rates.gamma_up)
        p_down_analytic = state0.prob_g
    else:
        p_down, err_down, p_down_analytic = 0.0, 0.0, 0.0

    return GuardianCheck(
        p_click_up=p_up,
        p_click_up_analytic=prob_e0,
        p_click_down=p_down,
        p_click_down_analytic=p_down_analytic,
        difference=p_up - prob_e0,
        abs_error_estimate=max(err_up, err_down),
    )


def tally_guardian_clicks(records: Sequence[TrajectoryRecord]) -> ClickTally:
    """
    Count first-jump directions over repeated preparations.

    A first jump down is a click-up (N_e), a first jump up is a click-down
    (N_g); trajectories without any jump are left unclassified.

    Args:
        records: Trajectory records

    Returns:
        ClickTally with counts and first-click times
    """
    n_g = n_e = 0
    first_times: List[float] = []
    for record in records:
        first = record.first_event
        if first is None:
            continue
        if first.direction == JumpDirection.DOWN:
            n_e += 1
        else:
            n_g += 1
        first_times.append(first.time)

    return ClickTally(
        n=len(records),
        n_g=n_g,
        n_e=n_e,
        first_click_times=first_times,
        t_max=max((record.t_max for record in records), default=0.0),
    )


def energy_moments_analytic(state0: PureState, e_q_kelvin: float) -> EnergyMoments:
    """
    Energy mean and variance of the prepared state (E_e = +1/2, E_g = -1/2).

    Args:
        state0: Prepared state
        e_q_kelvin: hbar*omega_Q / k_B

    Returns:
        EnergyMoments in units of hbar*omega_Q and in kelvin
    """
    prob_g = state0.prob_g
    mean = 0.5 * (1.0 - 2.0 * prob_g)
    variance = prob_g * (1.0 - prob_g)
    return EnergyMoments(
        mean=mean,
        variance=variance,
        mean_kelvin=mean * e_q_kelvin,
        variance_kelvin2=variance * e_q_kelvin ** 2,
    )


def energy_moments_empirical(
    tally: ClickTally,
    e_q_kelvin: float,
    silent_as_click_down: bool = True,
) -> EnergyMoments:
    """
    Plug-in energy mean and variance from guardian-click counts.

    Args:
        tally: Click counts
        e_q_kelvin: hbar*omega_Q / k_B
        silent_as_click_down: Count trajectories without a jump as click-down
            (otherwise they are dropped from N)

    Returns:
        EnergyMoments including the binomial standard error of the mean

    Raises:
        ParameterValidationError: If no usable repetitions remain
    """
    if tally.n == 0:
        raise ParameterValidationError("empty tally")

    n_g, n_e, n = tally.n_g, tally.n_e, tally.n
    if tally.n_silent:
        if silent_as_click_down:
            n_g += tally.n_silent
        else:
            n = n_g + n_e
        get_event_logger(component="measurement").warning(
            "silent_trajectories_classified",
            n_silent=tally.n_silent,
            classified_as="click-down" if silent_as_click_down else "excluded",
            t_max=tally.t_max,
        )
        if n == 0:
            raise ParameterValidationError("no trajectory produced a click")

    frac_g = n_g / n
    frac_e = n_e / n
    mean = frac_g * E_GROUND + frac_e * E_EXCITED
    second = frac_g * E_GROUND ** 2 + frac_e * E_EXCITED ** 2
    variance = max(second - mean ** 2, 0.0)

    return EnergyMoments(
        mean=mean,
        variance=variance,
        mean_kelvin=mean * e_q_kelvin,
        variance_kelvin2=variance * e_q_kelvin ** 2,
        mean_std_error=math.sqrt(variance / n),
    )


def survival_checkpoints(
    tally: ClickTally,
    state0: PureState,
    rates: Rates,
    checkpoints: Sequence[float],
) -> List[Dict[str, float]]:
    """
    Empirical jump-free fraction vs P_no-jump(t) at the given times.

    Returns:
        One dict per checkpoint with empirical, analytic, std_error and z
    """
    first_times = np.sort(np.asarray(tally.first_click_times, dtype=float))
    rows = []
    for t in checkpoints:
        jumped = int(np.searchsorted(first_times, t, side="right"))
        empirical = 1.0 - jumped / tally.n
        analytic = survival_probability(state0, rates, t)
        std_error = math.sqrt(max(analytic * (1.0 - analytic), 0.0) / tally.n)
        z = (empirical - analytic) / std_error if std_error > 0 else 0.0
        rows.append({"t": float(t), "empirical": empirical, "analytic": analytic, "std_error": std_error, "z": z})
    return rows


def first_click_histogram(tally: ClickTally, n_bins: int = 20) -> Dict[str, List[float]]:
    """Histogram of guardian-photon arrival times over [0, t_max]."""
    upper = tally.t_max if tally.t_max > 0 else 1.0
    counts, edges = np.histogram(tally.first_click_times, bins=n_bins, range=(0.0, upper))
    return {"edges": edges.tolist(), "counts": counts.tolist()}


def guardian_summary(
    tally: ClickTally,
    state0: PureState,
    rates: Rates,
    e_q_kelvin: float,
    silent_as_click_down: bool = True,
) -> Dict[str, Any]:
    """Counts, click probabilities and energy moments side by side."""
    check = guardian_click_probability(state0, rates)
    empirical = energy_moments_empirical(tally, e_q_kelvin, silent_as_click_down)
    analytic = energy_moments_analytic(state0, e_q_kelvin)

    summary = {
        "N": tally.n,
        "N_g": tally.n_g,
        "N_e": tally.n_e,
        "N_silent": tally.n_silent,
        "silent_classification": "click-down" if silent_as_click_down else "excluded",
        "p_hat": tally.n_e / tally.n,
        "p_analytic": state0.prob_e,
        "p_quadrature": check.p_click_up,
        "p_click_down_quadrature": check.p_click_down,
        "quadrature_difference": check.difference,
        "mean_E": empirical.mean,
        "var_E": empirical.variance,
        "mean_E_std_error": empirical.mean_std_error,
        "mean_E_analytic": analytic.mean,
        "var_E_analytic": analytic.variance,
        "mean_E_kelvin": empirical.mean_kelvin,
        "var_E_kelvin2": empirical.variance_kelvin2,
        "first_click_time_histogram": first_click_histogram(tally),
    }
    logger.info(
        f"Guardian clicks: N={tally.n}, N_e={tally.n_e}, N_g={tally.n_g}, "
        f"silent={tally.n_silent}, p_hat={summary['p_hat']:.4f} vs {state0.prob_e:.4f}"
    )
    return summary
