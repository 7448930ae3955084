"""White-box tests for the absorber temperature and thermometer model."""

import math

import numpy as np
import pytest

from src.models.schemas import JumpDirection, PureState, QubitBathParams
from src.physics.calorimeter import (
    equilibrium_trace,
    heat_capacity_over_kb,
    inject_photon,
    injections_from_record,
    photon_response,
    simulate_coupled_detection,
    simulate_detection,
    step_heights,
    step_temperature,
    summarize_detection,
    thermometer_step,
    thermometer_tracking,
)
from src.utils.errors import ConfigurationError, ParameterValidationError
from src.utils.rng import StreamFactory
from tests.conftest import _make_calorimeter, _make_record


def _autocorrelation(x, lag):
    return float(np.corrcoef(x[:-lag], x[lag:])[0, 1])


# ---------------------------------------------------------------------------
# Single-step updates
# ---------------------------------------------------------------------------

class TestStepUpdates:

    def test_noise_free_relaxation(self, calorimeter_params):
        values = [0.02]
        for _ in range(50):
            values.append(step_temperature(values[-1], calorimeter_params, 0.0))
        np.testing.assert_allclose(values, 0.02 * 0.99 ** np.arange(51), rtol=1e-12)

    def test_noise_amplitude(self, calorimeter_params):
        assert step_temperature(0.0, calorimeter_params, 1.0) == pytest.approx(0.01 * math.sqrt(2e-4))

    def test_photon_step(self, calorimeter_params):
        assert inject_photon(0.0, 1, calorimeter_params) == pytest.approx(0.01)
        assert inject_photon(0.0, -1, calorimeter_params) == pytest.approx(-0.01)

    def test_zero_photon_energy_is_no_op(self):
        params = _make_calorimeter(e_q_kelvin=0.0)
        assert inject_photon(0.003, 1, params) == 0.003

    def test_invalid_sign(self, calorimeter_params):
        with pytest.raises(ParameterValidationError):
            inject_photon(0.0, 0, calorimeter_params)
        with pytest.raises(ParameterValidationError):
            inject_photon(0.0, 2, calorimeter_params)


class TestThermometerStep:

    def test_fixed_point(self, calorimeter_params):
        assert thermometer_step(0.004, 0.004, calorimeter_params, 1.0) == pytest.approx(0.004, abs=1e-18)

    def test_fast_thermometer_follows_in_one_step(self, calorimeter_params):
        assert thermometer_step(0.0, 0.01, calorimeter_params, 100.0) == pytest.approx(0.01, abs=1e-18)

    def test_vectorized_over_ratios(self, calorimeter_params):
        theta = thermometer_step(np.zeros(3), 0.01, calorimeter_params, np.array([100.0, 1.0, 0.01]))
        np.testing.assert_allclose(theta, [0.01, 1e-4, 1e-6], rtol=1e-12)

    def test_unstable_ratio_rejected(self, calorimeter_params):
        with pytest.raises(ConfigurationError, match="unstable"):
            thermometer_step(0.0, 0.01, calorimeter_params, 250.0)

    def test_thermometer_noise_only_when_enabled(self, calorimeter_params):
        assert thermometer_step(0.0, 0.0, calorimeter_params, 1.0, xi=1.0) == 0.0
        noisy = _make_calorimeter(thermometer_noise_kelvin=1e-4)
        assert thermometer_step(0.0, 0.0, noisy, 1.0, xi=1.0) == pytest.approx(1e-5)


# ---------------------------------------------------------------------------
# Equilibrium noise
# ---------------------------------------------------------------------------

class TestEquilibriumNoise:

    def test_filter_matches_step_loop(self, calorimeter_params):
        trace = equilibrium_trace(calorimeter_params, np.random.default_rng(5), 500)

        rng = np.random.default_rng(5)
        values = [math.sqrt(calorimeter_params.stationary_variance) * rng.standard_normal()]
        for xi in rng.standard_normal(500):
            values.append(step_temperature(values[-1], calorimeter_params, xi))
        np.testing.assert_allclose(trace, values, rtol=1e-10, atol=1e-18)

    def test_stationary_variance(self, calorimeter_params):
        """Sample variance over 1e6 steps within 5% of the recursion's stationary value."""
        trace = equilibrium_trace(calorimeter_params, np.random.default_rng(11), 1_000_000)
        expected = calorimeter_params.stationary_variance
        assert expected == pytest.approx(1.005e-6, rel=1e-3)
        assert np.var(trace) == pytest.approx(expected, rel=0.05)

    def test_correlation_time_is_tau(self, calorimeter_params):
        trace = equilibrium_trace(calorimeter_params, np.random.default_rng(12), 1_000_000)
        for lag in (50, 100, 200):
            assert _autocorrelation(trace, lag) == pytest.approx(math.exp(-lag * calorimeter_params.du), abs=0.05)

    def test_noise_off_stays_at_zero(self):
        params = _make_calorimeter(noise_enabled=False)
        record = _make_record([])
        trace = simulate_detection(record, params, np.random.default_rng(0))
        assert np.all(trace.delta_t == 0.0)
        assert all(np.all(theta == 0.0) for theta in trace.theta.values())


# ---------------------------------------------------------------------------
# Detection traces
# ---------------------------------------------------------------------------

class TestSimulateDetection:

    def test_single_photon_relaxes_exponentially(self, quiet_calorimeter):
        record = _make_record([(1.0, "down")], t_max=20.0)
        trace = simulate_detection(record, quiet_calorimeter, np.random.default_rng(0))
        assert np.all(trace.delta_t[:100] == 0.0)
        n = np.arange(trace.delta_t.size - 100)
        np.testing.assert_allclose(trace.delta_t[100:], 0.01 * 0.99 ** n, rtol=1e-10)

    def test_sawtooth_matches_photon_response(self, quiet_calorimeter):
        record = _make_record([(1.0, "down"), (2.5, "up"), (4.0, "down")], t_max=20.0)
        trace = simulate_detection(record, quiet_calorimeter, np.random.default_rng(0))
        np.testing.assert_allclose(trace.delta_t, photon_response(trace, quiet_calorimeter), atol=1e-15)
        assert [event.sign for event in trace.events] == [1, -1, 1]

    def test_deposited_energy(self, quiet_calorimeter):
        """The area under one pulse is Delta T * tau."""
        record = _make_record([(1.0, "down")], t_max=20.0)
        trace = simulate_detection(record, quiet_calorimeter, np.random.default_rng(0))
        area = float(np.sum(trace.delta_t)) * quiet_calorimeter.du
        assert area == pytest.approx(quiet_calorimeter.photon_step_kelvin, rel=1e-6)

    def test_fast_thermometer_follows_and_slow_stays_flat(self, quiet_calorimeter):
        record = _make_record([(1.0, "down")], t_max=20.0)
        trace = simulate_detection(record, quiet_calorimeter, np.random.default_rng(0))
        np.testing.assert_allclose(trace.theta[100.0], trace.delta_t, atol=1e-15)
        assert np.max(np.abs(trace.theta[0.01])) < 0.02 * quiet_calorimeter.photon_step_kelvin

        tracking = thermometer_tracking(trace)
        assert tracking[100.0]["max_abs_deviation_kelvin"] <= 0.1 * tracking[100.0]["excursion_kelvin"]
        assert tracking[100.0]["excursion_kelvin"] == pytest.approx(0.01, rel=1e-9)
        assert tracking[0.01]["excursion_kelvin"] < tracking[1.0]["excursion_kelvin"]

    def test_thermometer_limits_with_noise(self, stream_factory):
        params = _make_calorimeter(window_u=10.0)
        trace = simulate_detection(_make_record([(1.0, "down")], t_max=10.0), params,
                                   stream_factory.calorimeter_stream(1))
        dynamic_range = float(np.ptp(trace.delta_t))
        tracking = thermometer_tracking(trace)
        assert tracking[100.0]["max_abs_deviation_kelvin"] <= 0.1 * dynamic_range
        assert tracking[0.01]["excursion_kelvin"] <= 0.1 * params.photon_step_kelvin

    def test_grid_mapping_uses_gamma_down_tau(self, quiet_calorimeter):
        params = QubitBathParams(beta_hw=math.inf, gamma_down_tau=2.0)
        record = _make_record([(3.0, "down")], params=params, t_max=10.0)
        (event,) = injections_from_record(record, quiet_calorimeter)
        assert event.u == pytest.approx(1.5)
        assert event.grid_index == 150

    def test_jump_between_grid_points_lands_on_next_point(self, quiet_calorimeter):
        record = _make_record([(1.0031, "up")], t_max=20.0)
        (event,) = injections_from_record(record, quiet_calorimeter)
        assert event.grid_index == 101
        assert event.sign == -1

    def test_jump_at_window_end_accepted(self, calorimeter_params):
        record = _make_record([(5.0, "down")], t_max=5.0)
        (event,) = injections_from_record(record, calorimeter_params)
        assert event.grid_index == calorimeter_params.n_steps

    def test_grid_covers_window_not_multiple_of_step(self):
        params = _make_calorimeter(du=0.03, window_u=0.1, tau_ratios=[1.0])
        assert params.n_steps == 4
        record = _make_record([(0.1, "down")], t_max=0.1)
        trace = simulate_detection(record, params, np.random.default_rng(0))
        assert trace.u[-1] >= params.window_u
        assert trace.events[0].grid_index == 4

    def test_jump_outside_window_rejected(self, calorimeter_params):
        record = _make_record([(6.0, "down")], t_max=10.0)
        with pytest.raises(ParameterValidationError, match="outside"):
            simulate_detection(record, calorimeter_params, np.random.default_rng(0))

    def test_reproducible_from_stream(self, calorimeter_params, stream_factory):
        record = _make_record([(1.0, "down")])
        first = simulate_detection(record, calorimeter_params, stream_factory.calorimeter_stream(3))
        second = simulate_detection(record, calorimeter_params, stream_factory.calorimeter_stream(3))
        np.testing.assert_array_equal(first.delta_t, second.delta_t)

    def test_equilibrium_start(self, stream_factory):
        params = _make_calorimeter(window_u=0.1)
        record = _make_record(t_max=0.1)
        starts = []
        for index in range(4000):
            trace = simulate_detection(record, params, stream_factory.calorimeter_stream(index))
            for reading in trace.theta.values():
                assert reading[0] == trace.delta_t[0]
            starts.append(trace.delta_t[0])
        assert np.var(starts) == pytest.approx(params.stationary_variance, rel=0.1)

    def test_start_at_zero_without_equilibration(self, stream_factory):
        params = _make_calorimeter(window_u=0.1, equilibrate=False)
        trace = simulate_detection(_make_record(t_max=0.1), params, stream_factory.calorimeter_stream(0))
        assert trace.delta_t[0] == 0.0

    def test_step_heights_recover_photon(self, calorimeter_params, stream_factory):
        record = _make_record([(1.0, "down"), (2.0, "up")])
        trace = simulate_detection(record, calorimeter_params, stream_factory.calorimeter_stream(0))
        noise_step = calorimeter_params.noise_amplitude
        for height in step_heights(trace, calorimeter_params):
            assert abs(height - 0.01) < 6.0 * noise_step


# ---------------------------------------------------------------------------
# Signal-to-noise
# ---------------------------------------------------------------------------

class TestSummarizeDetection:

    def test_analytic_snr(self, calorimeter_params):
        assert calorimeter_params.analytic_snr == pytest.approx(10.0)

    def test_ensemble_snr_close_to_analytic(self, calorimeter_params):
        factory = StreamFactory(2024)
        record = _make_record([(1.0, "down")])
        traces = [
            simulate_detection(record, calorimeter_params, factory.calorimeter_stream(index), trajectory_index=index)
            for index in range(100)
        ]
        summary = summarize_detection(traces, calorimeter_params)
        assert summary.n_traces_with_events == 100
        assert summary.noise_rms_kelvin == pytest.approx(summary.expected_noise_rms_kelvin, rel=0.15)
        assert summary.ensemble_snr == pytest.approx(10.0, rel=0.15)
        assert len(summary.per_trace_snr) == 100

    def test_noise_free_summary(self, quiet_calorimeter):
        trace = simulate_detection(_make_record([(1.0, "down")], t_max=20.0), quiet_calorimeter,
                                   np.random.default_rng(0))
        summary = summarize_detection([trace], quiet_calorimeter)
        assert summary.noise_rms_kelvin == pytest.approx(0.0, abs=1e-15)
        assert summary.mean_step_kelvin == pytest.approx(0.01)
        assert summary.expected_noise_rms_kelvin == 0.0

    def test_empty_input_rejected(self, calorimeter_params):
        with pytest.raises(ParameterValidationError):
            summarize_detection([], calorimeter_params)


# ---------------------------------------------------------------------------
# Physical inputs and temperature feedback
# ---------------------------------------------------------------------------

class TestHeatCapacity:

    def test_reference_absorber(self):
        assert heat_capacity_over_kb(100.0, 1e-21, 0.01) == pytest.approx(72.4, rel=1e-3)

    def test_linear_in_temperature(self):
        assert heat_capacity_over_kb(100.0, 1e-21, 0.02) == pytest.approx(2 * heat_capacity_over_kb(100.0, 1e-21, 0.01))


class TestCoupledDetection:

    @pytest.fixture(autouse=True)
    def setup(self):
        self.qubit = QubitBathParams(beta_hw=100.0, e_q_kelvin=1.0)
        self.state0 = PureState.from_populations(0.9)
        self.params = _make_calorimeter(noise_enabled=False)

    def test_record_and_trace_agree(self, stream_factory):
        for index in range(20):
            record, trace = simulate_coupled_detection(
                self.qubit, self.state0, self.params,
                stream_factory.trajectory_streams(index), stream_factory.calorimeter_stream(index),
            )
            assert len(record.events) == len(trace.events)
            assert record.t_max == pytest.approx(self.params.window_u)
            for event, injected in zip(record.events, trace.events):
                assert injected.sign == (1 if event.direction == JumpDirection.DOWN else -1)
                assert injected.grid_index == math.ceil(event.time / self.params.du - 1e-9)
            np.testing.assert_allclose(trace.delta_t, photon_response(trace, self.params), atol=1e-15)

    def test_reproducible(self, stream_factory):
        first, _ = simulate_coupled_detection(self.qubit, self.state0, self.params,
                                              stream_factory.trajectory_streams(2), stream_factory.calorimeter_stream(2))
        second, _ = simulate_coupled_detection(self.qubit, self.state0, self.params,
                                               stream_factory.trajectory_streams(2), stream_factory.calorimeter_stream(2))
        assert first.events == second.events

    def test_cold_absorber_gives_mostly_click_up(self, stream_factory):
        firsts = []
        for index in range(60):
            record, _ = simulate_coupled_detection(
                self.qubit, self.state0, self.params,
                stream_factory.trajectory_streams(index), stream_factory.calorimeter_stream(index),
            )
            if record.events:
                firsts.append(record.events[0].direction)
        assert firsts
        assert all(direction == JumpDirection.DOWN for direction in firsts)
