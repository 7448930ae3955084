"""White-box tests for the closed-form master equation and its ODE oracles."""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from src.models.schemas import PureState, QubitBathParams
from src.physics.master_equation import (
    check_density_elements,
    integrate_master_equation,
    jump_averaged_step,
    me_solution,
    no_jump_rhs,
)
from src.physics.trajectory import no_jump_evolve
from src.utils.errors import ParameterValidationError
from tests.conftest import BETA_SWEEP


# ---------------------------------------------------------------------------
# me_solution
# ---------------------------------------------------------------------------

class TestMESolution:

    def test_initial_condition_is_exact(self, finite_temperature_params):
        rho_gg, rho_ge = me_solution(finite_temperature_params, 0.1, 0.3 + 0.0j, 0.0)
        assert rho_gg == 0.1
        assert rho_ge == 0.3 + 0.0j

    def test_zero_temperature_decay(self, zero_temperature_params):
        t = np.linspace(0.0, 5.0, 11)
        rho_gg, _ = me_solution(zero_temperature_params, 0.1, 0.0, t)
        np.testing.assert_allclose(1.0 - rho_gg, 0.9 * np.exp(-t), rtol=0, atol=1e-14)

    def test_thermal_stationary_state(self, finite_temperature_params):
        rho_gg, _ = me_solution(finite_temperature_params, 0.1, 0.0, 100.0)
        assert 1.0 - rho_gg == pytest.approx(1.0 / (math.exp(0.5) + 1.0), abs=1e-12)
        assert 1.0 - rho_gg == pytest.approx(0.37754, abs=1e-5)

    def test_coherence_decays_at_half_sum_rate(self, finite_temperature_params, finite_temperature_rates):
        _, rho_ge = me_solution(finite_temperature_params, 0.5, 0.5j, 1.0)
        assert rho_ge == pytest.approx(0.5j * math.exp(-0.5 * finite_temperature_rates.gamma_sigma), abs=1e-15)

    def test_semigroup(self):
        for beta in BETA_SWEEP:
            params = QubitBathParams(beta_hw=beta)
            gg_mid, ge_mid = me_solution(params, 0.2, 0.3 - 0.1j, 0.7)
            gg_two_step, ge_two_step = me_solution(params, gg_mid, ge_mid, 1.1)
            gg_direct, ge_direct = me_solution(params, 0.2, 0.3 - 0.1j, 1.8)
            assert gg_two_step == pytest.approx(gg_direct, abs=1e-13)
            assert ge_two_step == pytest.approx(ge_direct, abs=1e-13)

    def test_positivity_preserved(self, finite_temperature_params):
        state = PureState.from_populations(0.9, phase=0.4)
        t = np.linspace(0.0, 10.0, 201)
        rho_gg, rho_ge = me_solution(finite_temperature_params, state.prob_g, state.coherence, t)
        assert np.all(rho_gg >= 0.0) and np.all(rho_gg <= 1.0)
        assert np.all(np.abs(rho_ge) ** 2 <= rho_gg * (1.0 - rho_gg) + 1e-12)

    def test_matches_runge_kutta(self):
        for beta in (0.5, math.inf):
            params = QubitBathParams(beta_hw=beta)
            t = np.linspace(0.0, 4.0, 41)
            closed_gg, closed_ge = me_solution(params, 0.1, 0.2 + 0.1j, t)
            numeric_gg, numeric_ge = integrate_master_equation(params, 0.1, 0.2 + 0.1j, t)
            np.testing.assert_allclose(numeric_gg, closed_gg, atol=1e-8)
            np.testing.assert_allclose(numeric_ge, closed_ge, atol=1e-8)

    def test_negative_time_rejected(self, finite_temperature_params):
        with pytest.raises(ParameterValidationError):
            me_solution(finite_temperature_params, 0.5, 0.0, -1.0)


class TestCheckDensityElements:

    def test_population_out_of_range(self):
        with pytest.raises(ParameterValidationError):
            check_density_elements(1.2, 0.0)

    def test_coherence_too_large(self):
        with pytest.raises(ParameterValidationError):
            check_density_elements(0.5, 0.6)

    def test_pure_state_accepted(self):
        state = PureState.from_populations(0.3, phase=1.0)
        check_density_elements(state.prob_g, state.coherence)


# ---------------------------------------------------------------------------
# jump_averaged_step and no_jump_rhs
# ---------------------------------------------------------------------------

class TestJumpAveragedStep:

    def test_first_order_agreement_with_master_equation(self, finite_temperature_rates):
        rates = finite_temperature_rates
        state = PureState.from_populations(0.7, phase=0.3)
        dt = 1e-3
        j_gg, j_ge = jump_averaged_step(state, rates, dt)

        me_gg = state.prob_g + dt * (rates.gamma_down - rates.gamma_sigma * state.prob_g)
        me_ge = state.coherence * (1.0 - 0.5 * rates.gamma_sigma * dt)
        assert abs(j_gg - me_gg) <= 10 * dt ** 2
        assert abs(j_ge - me_ge) <= 10 * dt ** 2

    def test_error_is_second_order(self, finite_temperature_rates):
        state = PureState.from_populations(0.4)
        errors = []
        for dt in (1e-2, 5e-3):
            j_gg, _ = jump_averaged_step(state, finite_temperature_rates, dt)
            exact, _ = me_solution(finite_temperature_rates, state.prob_g, state.coherence, dt)
            errors.append(abs(j_gg - exact))
        assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.1)


class TestNoJumpRHS:

    def test_ode_matches_closed_form(self, finite_temperature_rates):
        state0 = PureState.from_populations(0.9)
        t_eval = np.linspace(0.0, 3.0, 7)
        solution = solve_ivp(
            no_jump_rhs, (0.0, 3.0), [state0.a.real, state0.b.real],
            t_eval=t_eval, rtol=1e-11, atol=1e-12, args=(finite_temperature_rates,),
        )
        for t, a, b in zip(t_eval, solution.y[0], solution.y[1]):
            expected = no_jump_evolve(state0, finite_temperature_rates, t)
            assert a == pytest.approx(expected.a.real, abs=1e-8)
            assert b == pytest.approx(expected.b.real, abs=1e-8)
