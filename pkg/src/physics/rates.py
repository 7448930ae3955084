"""Golden-rule transition rates of a qubit coupled to a resistive bath.

All rates are expressed in units of omega_Q/Q, so the zero-temperature
relaxation rate is exactly 1. Physical units enter only through
``physical_rates``.
"""

import math
from typing import Any, Dict

from scipy import constants

from ..models.schemas import QubitBathParams, Rates
from ..utils.errors import ParameterValidationError
from ..utils.logger import get_logger

logger = get_logger(__name__)


def _check_beta(beta_hw: float) -> None:
    if math.isnan(beta_hw) or beta_hw <= 0:
        raise ParameterValidationError(f"beta_hw must be > 0 (or inf for T=0), got {beta_hw}")


def compute_rates(params: QubitBathParams) -> Rates:
    """
    Compute Gamma_down, Gamma_up from the bath temperature.

    gamma_down = 1/(1 - e^{-beta_hw}), gamma_up = e^{-beta_hw} * gamma_down,
    so detailed balance holds by construction.

    Args:
        params: Qubit/bath parameters

    Returns:
        Rates in units of omega_Q/Q
    """
    _check_beta(params.beta_hw)
    if params.quality_factor <= 0:
        raise ParameterValidationError(f"quality_factor must be > 0, got {params.quality_factor}")

    if params.is_zero_temperature:
        gamma_down, gamma_up = 1.0, 0.0
    else:
        gamma_down = -1.0 / math.expm1(-params.beta_hw)
        gamma_up = math.exp(-params.beta_hw) * gamma_down

    return Rates(
        gamma_down=gamma_down,
        gamma_up=gamma_up,
        gamma_sigma=gamma_down + gamma_up,
        delta_gamma=gamma_down - gamma_up,
    )


def spectral_density(omega_sign: int, beta_hw: float) -> float:
    """
    Current-noise spectral density S_i(+-omega_Q) normalized by 2 hbar omega_Q / R.

    Args:
        omega_sign: +1 (emission into the bath) or -1 (absorption from it)
        beta_hw: beta*hbar*omega_Q, or inf for T=0

    Returns:
        omega_sign / (1 - e^{-omega_sign*beta_hw}), which is non-negative
    """
    if omega_sign not in (1, -1):
        raise ParameterValidationError(f"omega_sign must be +1 or -1, got {omega_sign}")
    _check_beta(beta_hw)

    if math.isinf(beta_hw):
        return 1.0 if omega_sign == 1 else 0.0
    if omega_sign == 1:
        return -1.0 / math.expm1(-beta_hw)
    return 1.0 / math.expm1(beta_hw)


def detailed_balance_residual(rates: Rates, beta_hw: float) -> float:
    """|Gamma_up/Gamma_down - e^{-beta_hw}|."""
    expected = 0.0 if math.isinf(beta_hw) else math.exp(-beta_hw)
    return abs(rates.gamma_up / rates.gamma_down - expected)


def rates_at_temperature(params: QubitBathParams, temperature_kelvin: float) -> Rates:
    """
    Rates for an absorber at an arbitrary temperature (temperature-feedback hook).

    Args:
        params: Qubit/bath parameters (e_q_kelvin sets the level splitting)
        temperature_kelvin: Instantaneous absorber temperature; <= 0 means T=0

    Returns:
        Rates in units of omega_Q/Q
    """
    if temperature_kelvin <= 0:
        beta_hw = math.inf
    else:
        beta_hw = params.e_q_kelvin / temperature_kelvin
    return compute_rates(params.model_copy(update={"beta_hw": beta_hw}))


def physical_rates(params: QubitBathParams) -> Dict[str, Any]:
    """
    Convert the dimensionless description to SI quantities.

    omega_Q = k_B * e_q_kelvin / hbar, Gamma_down(T=0) = omega_Q/Q and
    T1 = Q/omega_Q.

    Args:
        params: Qubit/bath parameters

    Returns:
        Dict with qubit frequency, rates in 1/s, T1 and the bath temperature
    """
    rates = compute_rates(params)
    omega_q = constants.k * params.e_q_kelvin / constants.hbar
    rate_unit = omega_q / params.quality_factor

    return {
        "omega_q_rad_per_s": omega_q,
        "frequency_ghz": omega_q / (2.0 * math.pi) / 1e9,
        "t1_seconds": params.quality_factor / omega_q,
        "gamma_down_per_s": rates.gamma_down * rate_unit,
        "gamma_up_per_s": rates.gamma_up * rate_unit,
        "bath_temperature_kelvin": params.bath_temperature_kelvin,
    }


def rates_report(params: QubitBathParams) -> Dict[str, Any]:
    """Rates, detailed-balance residual and SI conversions in one dict."""
    rates = compute_rates(params)
    report = {
        "beta_hw": "inf" if params.is_zero_temperature else params.beta_hw,
        "gamma_down": rates.gamma_down,
        "gamma_up": rates.gamma_up,
        "gamma_sigma": rates.gamma_sigma,
        "delta_gamma": rates.delta_gamma,
        "detailed_balance_residual": detailed_balance_residual(rates, params.beta_hw),
        "units": "omega_Q/Q",
        "physical": physical_rates(params),
    }
    logger.debug(f"Rates report: {report}")
    return report
