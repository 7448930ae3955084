"""Closed-form master equation of the two-level system, plus ODE oracles."""

from typing import Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp

from ..models.schemas import PureState, QubitBathParams, Rates
from ..utils.errors import ParameterValidationError
from .rates import compute_rates

ArrayLike = Union[float, np.ndarray]

POSITIVITY_TOLERANCE = 1e-12


def check_density_elements(rho_gg: float, rho_ge: complex) -> None:
    """Reject populations outside [0, 1] or coherences violating positivity."""
    if not (-POSITIVITY_TOLERANCE <= rho_gg <= 1.0 + POSITIVITY_TOLERANCE):
        raise ParameterValidationError(f"rho_gg must lie in [0, 1], got {rho_gg}")
    if abs(rho_ge) ** 2 > rho_gg * (1.0 - rho_gg) + POSITIVITY_TOLERANCE:
        raise ParameterValidationError(
            f"|rho_ge|^2 = {abs(rho_ge) ** 2} exceeds rho_gg(1-rho_gg) = {rho_gg * (1.0 - rho_gg)}"
        )


def _rates_of(params_or_rates: Union[QubitBathParams, Rates]) -> Rates:
    if isinstance(params_or_rates, Rates):
        return params_or_rates
    return compute_rates(params_or_rates)


def me_solution(
    params: Union[QubitBathParams, Rates],
    rho_gg0: float,
    rho_ge0: complex,
    t: ArrayLike,
) -> Tuple[ArrayLike, ArrayLike]:
    """
    Evaluate the master-equation solution at time(s) t.

    rho_gg(t) = G_down/G_sigma + (rho_gg0 - G_down/G_sigma) e^{-G_sigma t}
    rho_ge(t) = rho_ge0 e^{-G_sigma t / 2}

    Args:
        params: Qubit/bath parameters (or precomputed rates)
        rho_gg0: Initial ground-state population
        rho_ge0: Initial coherence <g|rho|e>
        t: Time or array of times (units 1/Gamma_down(T=0)), t >= 0

    Returns:
        (rho_gg, rho_ge) with the shape of t
    """
    check_density_elements(rho_gg0, rho_ge0)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ParameterValidationError("t must be non-negative")

    rates = _rates_of(params)
    if np.all(t_arr == 0):
        rho_gg = np.full(t_arr.shape, rho_gg0, dtype=float)
        rho_ge = np.full(t_arr.shape, rho_ge0, dtype=complex)
    else:
        stationary = rates.gamma_down / rates.gamma_sigma
        rho_gg = stationary + (rho_gg0 - stationary) * np.exp(-rates.gamma_sigma * t_arr)
        rho_ge = rho_ge0 * np.exp(-0.5 * rates.gamma_sigma * t_arr)

    if t_arr.ndim == 0:
        return float(rho_gg), complex(rho_ge)
    return rho_gg, rho_ge


def me_rhs(t: float, y: np.ndarray, rates: Rates) -> np.ndarray:
    """Right-hand side of the master equation for y = [rho_gg, Re rho_ge, Im rho_ge]."""
    return np.array([
        -rates.gamma_sigma * y[0] + rates.gamma_down,
        -0.5 * rates.gamma_sigma * y[1],
        -0.5 * rates.gamma_sigma * y[2],
    ])


def integrate_master_equation(
    params: QubitBathParams,
    rho_gg0: float,
    rho_ge0: complex,
    t_eval: np.ndarray,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Numerically integrate the master equation (fourth/fifth-order Runge-Kutta).

    Kept as an independent check of ``me_solution``.

    Args:
        params: Qubit/bath parameters
        rho_gg0: Initial ground-state population
        rho_ge0: Initial coherence
        t_eval: Increasing output times starting at or after 0

    Returns:
        (rho_gg, rho_ge) arrays on t_eval
    """
    rates = compute_rates(params)
    t_eval = np.asarray(t_eval, dtype=float)
    y0 = np.array([rho_gg0, complex(rho_ge0).real, complex(rho_ge0).imag])
    solution = solve_ivp(
        me_rhs, (0.0, float(t_eval[-1])), y0, method="RK45",
        t_eval=t_eval, rtol=rtol, atol=atol, args=(rates,),
    )
    return solution.y[0], solution.y[1] + 1j * solution.y[2]


def no_jump_rhs(t: float, y: np.ndarray, rates: Rates) -> np.ndarray:
    """
    Conditional no-jump dynamics for real amplitudes y = [a, b].

    a' = +1/2 dGamma a |b|^2, b' = -1/2 dGamma b |a|^2 (the Gamma_up and
    Gamma_down damping terms are absorbed by the renormalization).
    """
    a, b = y
    return np.array([
        0.5 * rates.delta_gamma * a * b * b,
        -0.5 * rates.delta_gamma * b * a * a,
    ])


def jump_averaged_step(state: PureState, rates: Rates, dt: float) -> Tuple[float, complex]:
    """
    Trajectory average one step dt after a pure state.

    J = (1 - dp)|psi0(t+dt)><psi0(t+dt)| + dp_down|g><g| + dp_up|e><e|, where
    psi0 is the first-order no-jump update. To first order in dt this equals
    one explicit step of the master equation.

    Args:
        state: Current pure state
        rates: Transition rates
        dt: Step length

    Returns:
        (J_gg, J_ge) after the step
    """
    dp_down = rates.gamma_down * state.prob_e * dt

    # (1 - i dt H) with the level splitting dropped (rotating frame)
    a_unnormalized = state.a * (1.0 - 0.5 * rates.gamma_up * dt)
    b_unnormalized = state.b * (1.0 - 0.5 * rates.gamma_down * dt)

    # the (1 - dp) weight cancels the 1/sqrt(1 - dp) normalization of psi0
    j_gg = abs(a_unnormalized) ** 2 + dp_down
    j_ge = a_unnormalized * b_unnormalized.conjugate()
    return j_gg, j_ge
