"""Ensemble runner - fans trajectory and detection work out over a process pool."""

from multiprocessing import Pool
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..analysis.ensemble import EnsembleAccumulator
from ..analysis.measurement import tally_guardian_clicks
from ..models.schemas import (
    CalorimeterParams,
    ClickTally,
    EnsembleStats,
    JumpEvent,
    QubitBathParams,
    RunConfig,
    TemperatureTrace,
    TrajectoryRecord,
)
from ..physics.calorimeter import simulate_coupled_detection, simulate_detection
from ..physics.trajectory import sample_record, simulate
from ..storage.writers import EVENTS_COLUMNS
from ..utils.errors import ConfigurationError, ParameterValidationError, SimulationError
from ..utils.logger import get_logger
from ..utils.rng import StreamFactory

logger = get_logger(__name__)


class TrajectoryChunk(NamedTuple):
    """Work unit: trajectories [start, stop) of one run."""
    params: QubitBathParams
    config: RunConfig
    start: int
    stop: int
    grid: Optional[np.ndarray]


class ChunkResult(NamedTuple):
    accumulator: Optional[EnsembleAccumulator]
    tally: ClickTally
    events: List[Tuple[int, float, str]]
    saved: List[TrajectoryRecord]


class DetectionChunk(NamedTuple):
    """Work unit: detection traces [start, stop), optionally from saved events."""
    params: QubitBathParams
    config: RunConfig
    start: int
    stop: int
    saved_events: Optional[Dict[int, List[JumpEvent]]]


class EnsembleResult(NamedTuple):
    """Merged outcome of a trajectory run."""
    n: int
    stats: Optional[EnsembleStats]
    tally: ClickTally
    events: pd.DataFrame
    saved: List[TrajectoryRecord]


def _simulate_one(params: QubitBathParams, config: RunConfig, factory: StreamFactory, index: int) -> TrajectoryRecord:
    try:
        return simulate(
            params,
            config.initial_state.to_state(),
            config.ensemble.t_max,
            factory.trajectory_streams(index),
            scheme=config.ensemble.scheme,
            dt=config.ensemble.dt,
        )
    except (ParameterValidationError, ConfigurationError):
        raise
    except Exception as e:
        raise SimulationError(f"trajectory failed: {e}", stream_index=index) from e


def run_trajectory_chunk(chunk: TrajectoryChunk) -> ChunkResult:
    """
    Simulate one chunk of trajectories.

    Module-level so that it pickles into worker processes.
    """
    factory = StreamFactory(chunk.config.seed)
    accumulator = EnsembleAccumulator(chunk.grid) if chunk.grid is not None else None
    saved_limit = chunk.config.ensemble.saved_trajectories

    records = []
    events = []
    saved = []
    for index in range(chunk.start, chunk.stop):
        record = _simulate_one(chunk.params, chunk.config, factory, index)
        records.append(record)
        events.extend((index, event.time, event.direction.value) for event in record.events)

        samples = None
        if accumulator is not None:
            samples = sample_record(record, chunk.grid)
            accumulator.add(samples)
        if index < saved_limit:
            saved.append(record.model_copy(update={"samples": samples}) if samples is not None else record)

    return ChunkResult(
        accumulator=accumulator,
        tally=tally_guardian_clicks(records),
        events=events,
        saved=saved,
    )


def _detection_record(chunk: DetectionChunk, factory: StreamFactory, index: int) -> TrajectoryRecord:
    if chunk.saved_events is None:
        return _simulate_one(chunk.params, chunk.config, factory, index)
    return TrajectoryRecord(
        params=chunk.params,
        initial_state=chunk.config.initial_state.to_state(),
        seed=chunk.config.seed,
        stream_index=index,
        scheme=chunk.config.ensemble.scheme,
        t_max=chunk.config.ensemble.t_max,
        events=chunk.saved_events.get(index, []),
    )


def run_detection_chunk(chunk: DetectionChunk) -> List[Tuple[TrajectoryRecord, TemperatureTrace]]:
    """Simulate the detection traces of one chunk (trajectory plus absorber)."""
    config = chunk.config
    calorimeter: CalorimeterParams = config.calorimeter
    factory = StreamFactory(config.seed)

    results = []
    for index in range(chunk.start, chunk.stop):
        noise_rng = factory.calorimeter_stream(index)
        try:
            if config.temperature_feedback:
                record, trace = simulate_coupled_detection(
                    chunk.params,
                    config.initial_state.to_state(),
                    calorimeter,
                    factory.trajectory_streams(index),
                    noise_rng,
                )
            else:
                record = _detection_record(chunk, factory, index)
                trace = simulate_detection(record, calorimeter, noise_rng, trajectory_index=index)
        except (ParameterValidationError, ConfigurationError, SimulationError):
            raise
        except Exception as e:
            raise SimulationError(f"detection trace failed: {e}", stream_index=index) from e
        results.append((record, trace))
    return results


class EnsembleRunner:
    """
    Runs trajectory ensembles in fixed-size chunks.

    Chunk boundaries depend only on chunk_size and results are merged in
    chunk order, so the output does not depend on the worker count.
    """

    def __init__(self, workers: int = 1, chunk_size: int = 256):
        """
        Initialize runner.

        Args:
            workers: Number of worker processes (1 runs in-process)
            chunk_size: Trajectories per work unit
        """
        if workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {workers}")
        if chunk_size < 1:
            raise ConfigurationError(f"chunk_size must be >= 1, got {chunk_size}")
        self.workers = workers
        self.chunk_size = chunk_size
        logger.info(f"EnsembleRunner initialized (workers={workers}, chunk_size={chunk_size})")

    def _bounds(self, n: int) -> List[Tuple[int, int]]:
        return [(start, min(start + self.chunk_size, n)) for start in range(0, n, self.chunk_size)]

    def _map(self, func, tasks: Sequence) -> List:
        if self.workers == 1 or len(tasks) <= 1:
            return [func(task) for task in tasks]
        with Pool(processes=min(self.workers, len(tasks))) as pool:
            return pool.map(func, tasks, chunksize=1)

    def run_trajectories(
        self,
        params: QubitBathParams,
        config: RunConfig,
        grid: Optional[Sequence[float]] = None,
    ) -> EnsembleResult:
        """
        Simulate config.ensemble.n trajectories.

        Args:
            params: Qubit/bath parameters
            config: Run configuration (seed, initial state, ensemble section)
            grid: Sample grid for ensemble statistics; None skips aggregation

        Returns:
            EnsembleResult with merged statistics, tally, events and saved records

        Raises:
            SimulationError: If any trajectory fails (carries its stream index)
        """
        n = config.ensemble.n
        grid_array = None if grid is None else np.asarray(grid, dtype=float)
        tasks = [TrajectoryChunk(params, config, start, stop, grid_array) for start, stop in self._bounds(n)]
        logger.info(f"Running {n} trajectories in {len(tasks)} chunks ({config.ensemble.scheme.value} scheme)")

        partials: List[ChunkResult] = self._map(run_trajectory_chunk, tasks)

        accumulator = None
        tally = ClickTally(n=0)
        events = []
        saved = []
        for partial in partials:
            if partial.accumulator is not None:
                accumulator = partial.accumulator if accumulator is None else accumulator.merge(partial.accumulator)
            tally = tally.merge(partial.tally)
            events.extend(partial.events)
            saved.extend(partial.saved)

        stats = None
        if accumulator is not None:
            stats = accumulator.finalize(params, config.initial_state.to_state())

        return EnsembleResult(
            n=n,
            stats=stats,
            tally=tally,
            events=pd.DataFrame(events, columns=EVENTS_COLUMNS),
            saved=saved,
        )

    def run_detection(
        self,
        params: QubitBathParams,
        config: RunConfig,
        saved_events: Optional[Dict[int, List[JumpEvent]]] = None,
    ) -> Tuple[List[TrajectoryRecord], List[TemperatureTrace]]:
        """
        Simulate one detection trace per trajectory index 0..n-1.

        Args:
            params: Qubit/bath parameters for trajectory generation
            config: Run configuration with a calorimeter section
            saved_events: Events read from a previous run, used instead of
                generating trajectories

        Returns:
            (records, traces) in index order
        """
        if config.calorimeter is None:
            raise ConfigurationError("calorimeter section is required for detection runs")
        n = config.ensemble.n
        tasks = [DetectionChunk(params, config, start, stop, saved_events) for start, stop in self._bounds(n)]
        logger.info(f"Running {n} detection traces in {len(tasks)} chunks")

        records: List[TrajectoryRecord] = []
        traces: List[TemperatureTrace] = []
        for partial in self._map(run_detection_chunk, tasks):
            for record, trace in partial:
                records.append(record)
                traces.append(trace)
        return records, traces
