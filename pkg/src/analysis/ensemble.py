"""Ensemble averages of trajectories and their comparison with the master equation."""

from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import curve_fit

from ..models.schemas import (
    EnsembleStats,
    MEComparisonReport,
    PureState,
    QubitBathParams,
    SampleSeries,
    TrajectoryRecord,
)
from ..physics.master_equation import me_solution
from ..physics.rates import compute_rates
from ..physics.trajectory import sample_record
from ..utils.errors import ParameterValidationError
from ..utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_BINS = 200
Z_OUTLIER = 3.0


def default_grid(t_max: float, n_bins: int = DEFAULT_BINS) -> np.ndarray:
    """Centers of n_bins uniform bins over [0, t_max]."""
    return (np.arange(n_bins) + 0.5) * (t_max / n_bins)


class EnsembleAccumulator:
    """
    Running sums over trajectories sampled on a shared grid.

    Accumulators merge associatively, so partial sums computed by separate
    workers can be combined in index order.
    """

    def __init__(self, grid: Sequence[float]):
        self.grid = np.asarray(grid, dtype=float)
        self.n = 0
        self.sum_g = np.zeros(self.grid.shape)
        self.sumsq_g = np.zeros(self.grid.shape)
        self.sum_e = np.zeros(self.grid.shape)
        self.sumsq_e = np.zeros(self.grid.shape)
        self.sum_ge = np.zeros(self.grid.shape, dtype=complex)
        self.sumsq_ge = np.zeros(self.grid.shape)

    def add(self, samples: SampleSeries) -> None:
        """Add one trajectory's samples."""
        self.n += 1
        self.sum_g += samples.prob_g
        self.sumsq_g += samples.prob_g ** 2
        self.sum_e += samples.prob_e
        self.sumsq_e += samples.prob_e ** 2
        self.sum_ge += samples.coherence
        self.sumsq_ge += np.abs(samples.coherence) ** 2

    def merge(self, other: "EnsembleAccumulator") -> "EnsembleAccumulator":
        """Fold another accumulator (later indices) into this one."""
        if not np.array_equal(self.grid, other.grid):
            raise ParameterValidationError("cannot merge accumulators with different grids")
        self.n += other.n
        self.sum_g += other.sum_g
        self.sumsq_g += other.sumsq_g
        self.sum_e += other.sum_e
        self.sumsq_e += other.sumsq_e
        self.sum_ge += other.sum_ge
        self.sumsq_ge += other.sumsq_ge
        return self

    def _standard_error(self, total: np.ndarray, total_sq: np.ndarray) -> np.ndarray:
        if self.n < 2:
            return np.zeros(self.grid.shape)
        variance = np.maximum(total_sq - np.abs(total) ** 2 / self.n, 0.0) / (self.n - 1)
        return np.sqrt(variance / self.n)

    def finalize(self, params: QubitBathParams, initial_state: PureState) -> EnsembleStats:
        """Means and standard errors per bin."""
        if self.n == 0:
            raise ParameterValidationError("no trajectories were accumulated")
        return EnsembleStats(
            grid=self.grid,
            j_gg=self.sum_g / self.n,
            j_ee=self.sum_e / self.n,
            j_ge=self.sum_ge / self.n,
            se_gg=self._standard_error(self.sum_g, self.sumsq_g),
            se_ee=self._standard_error(self.sum_e, self.sumsq_e),
            se_ge=self._standard_error(self.sum_ge, self.sumsq_ge),
            n_trajectories=self.n,
            params=params,
            initial_state=initial_state,
        )


def aggregate(records: List[TrajectoryRecord], grid: Optional[Sequence[float]] = None) -> EnsembleStats:
    """
    Average trajectories bin by bin.

    Args:
        records: Index-ordered trajectory records sharing params and initial state
        grid: Sample times; defaults to 200 bin centers over [0, t_max]

    Returns:
        EnsembleStats

    Raises:
        ParameterValidationError: On empty input, mixed parameters, or a grid
            reaching beyond a record's t_max
    """
    if not records:
        raise ParameterValidationError("aggregate needs at least one record")

    reference = records[0]
    grid = default_grid(reference.t_max) if grid is None else np.asarray(grid, dtype=float)

    accumulator = EnsembleAccumulator(grid)
    for record in records:
        if record.params != reference.params or record.initial_state != reference.initial_state:
            raise ParameterValidationError(
                f"record {record.stream_index} has different parameters from record {reference.stream_index}"
            )
        if grid.size and grid[-1] > record.t_max * (1.0 + 1e-12):
            raise ParameterValidationError(
                f"grid extends to {grid[-1]} beyond t_max = {record.t_max} of record {record.stream_index}"
            )
        samples = record.samples
        if samples is None or not np.array_equal(samples.t, grid):
            samples = sample_record(record, grid)
        accumulator.add(samples)

    logger.debug(f"Aggregated {accumulator.n} trajectories on {grid.size} bins")
    return accumulator.finalize(reference.params, reference.initial_state)


def fit_coherence_decay(stats: EnsembleStats) -> Optional[float]:
    """
    Fit |J_ge(t)| = A e^{-k t} and return k.

    Only bins whose magnitude clearly exceeds its standard error are used.

    Returns:
        Fitted k, or None when the coherence is too small to fit
    """
    magnitude = np.abs(stats.j_ge)
    if magnitude.size == 0 or magnitude[0] <= 0:
        return None

    usable = (magnitude > 5.0 * stats.se_ge) & (magnitude > 1e-3 * magnitude[0])
    if np.count_nonzero(usable) < 3:
        return None

    t = stats.grid[usable]
    y = magnitude[usable]
    sigma = stats.se_ge[usable]
    if np.any(sigma <= 0):
        sigma = None

    rates = compute_rates(stats.params)
    try:
        (amplitude, rate), _ = curve_fit(
            lambda s, amp, k: amp * np.exp(-k * s),
            t, y, p0=(y[0], 0.5 * rates.gamma_sigma), sigma=sigma,
        )
    except (RuntimeError, ValueError) as e:
        logger.warning(f"Coherence decay fit failed: {e}")
        return None
    return float(rate)


def compare_to_me(stats: EnsembleStats, params: Optional[QubitBathParams] = None) -> MEComparisonReport:
    """
    Compare trajectory averages with the closed-form master equation.

    Args:
        stats: Ensemble statistics
        params: Parameters for the reference solution (defaults to stats.params)

    Returns:
        MEComparisonReport with max |J_ee - rho_ee|, per-bin z-scores, the
        fraction of |z| > 3 bins and the fitted coherence decay rate
    """
    params = params or stats.params
    state0 = stats.initial_state
    rho_gg, rho_ge = me_solution(params, state0.prob_g, state0.coherence, stats.grid)
    rho_gg = np.asarray(rho_gg, dtype=float)
    rho_ee = 1.0 - rho_gg

    deviation = stats.j_ee - rho_ee
    z_scores = np.zeros(deviation.shape)
    positive = stats.se_ee > 0
    z_scores[positive] = deviation[positive] / stats.se_ee[positive]
    z_scores[~positive & (np.abs(deviation) > 1e-12)] = np.inf

    max_deviation = float(np.max(np.abs(deviation))) if deviation.size else 0.0
    report = MEComparisonReport(
        rho_gg=rho_gg,
        rho_ee=rho_ee,
        rho_ge=np.asarray(rho_ge, dtype=complex),
        z_scores=z_scores,
        max_deviation=max_deviation,
        max_deviation_ge=float(np.max(np.abs(stats.j_ge - rho_ge))) if deviation.size else 0.0,
        max_standard_error=float(np.max(stats.se_ee)) if deviation.size else 0.0,
        fraction_outliers=float(np.mean(np.abs(z_scores) > Z_OUTLIER)) if deviation.size else 0.0,
        coherence_decay_rate=fit_coherence_decay(stats),
        expected_decay_rate=0.5 * compute_rates(params).gamma_sigma,
    )

    logger.info(
        f"ME comparison: max|J_ee-rho_ee|={report.max_deviation:.3e}, "
        f"max SE={report.max_standard_error:.3e}, |z|>3 fraction={report.fraction_outliers:.3f}"
    )
    return report
