"""CSV and JSON emission of run artifacts, plus reading saved event files."""

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import numpy as np
import pandas as pd

from .. import __version__
from ..models.schemas import (
    EnsembleStats,
    JumpDirection,
    JumpEvent,
    MEComparisonReport,
    RunConfig,
    TemperatureTrace,
    TrajectoryRecord,
)
from ..utils.config import config_echo
from ..utils.errors import ConfigurationError
from ..utils.logger import get_logger

logger = get_logger(__name__)

FLOAT_FORMAT = "%.17g"
EVENTS_COLUMNS = ["trajectory", "time", "direction"]


def config_digest(config: RunConfig) -> str:
    """sha256 of the canonical resolved-config JSON."""
    canonical = json.dumps(config_echo(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def provenance(config: RunConfig, subcommand: str, **extra: Any) -> Dict[str, Any]:
    """Header fields written on every CSV file (no wall-clock data)."""
    header = {
        "generator": f"quantum-jump-calorimetry {__version__}",
        "subcommand": subcommand,
        "seed": config.seed,
        "config_sha256": config_digest(config),
    }
    header.update(extra)
    return header


def to_jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(float(value.real)), to_jsonable(float(value.imag))]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def write_json(data: Mapping[str, Any], path: Path) -> Path:
    """Write a report as sorted, indented JSON."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return path


def write_csv(df: pd.DataFrame, path: Path, header: Optional[Mapping[str, Any]] = None) -> Path:
    """
    Write a DataFrame as CSV with a '#'-prefixed provenance header.

    Args:
        df: Data to write
        path: Target file
        header: Key/values written as '# key: value' lines before the column row

    Returns:
        The written path
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for key, value in (header or {}).items():
            handle.write(f"# {key}: {value}\n")
        df.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {path} ({len(df)} rows)")
    return path


def write_events(events: pd.DataFrame, path: Path, header: Mapping[str, Any]) -> Path:
    """Write the combined events table (columns trajectory,time,direction)."""
    return write_csv(events[EVENTS_COLUMNS], path, header)


def read_events(path: Path) -> Dict[int, List[JumpEvent]]:
    """
    Read an events.csv back into per-trajectory event lists.

    Args:
        path: events.csv written by the ensemble or guardian subcommand

    Returns:
        Mapping trajectory index -> time-ordered events

    Raises:
        ConfigurationError: If the file is missing or malformed
    """
    if not path.exists():
        raise ConfigurationError(f"Trajectories file not found: {path}")
    df = pd.read_csv(path, comment="#")
    missing = set(EVENTS_COLUMNS) - set(df.columns)
    if missing:
        raise ConfigurationError(f"{path} is missing columns: {sorted(missing)}")

    events: Dict[int, List[JumpEvent]] = {}
    try:
        for trajectory, group in df.groupby("trajectory", sort=True):
            events[int(trajectory)] = [
                JumpEvent(time=float(time), direction=JumpDirection(direction))
                for time, direction in zip(group["time"], group["direction"])
            ]
    except ValueError as e:
        raise ConfigurationError(f"{path} contains an invalid event: {e}") from e
    logger.info(f"Read {len(df)} events for {len(events)} trajectories from {path}")
    return events


def write_trajectory_record(record: TrajectoryRecord, out_dir: Path, header: Mapping[str, Any]) -> List[Path]:
    """Write one trajectory's events (and samples, when attached)."""
    stem = f"trajectory_{record.stream_index:06d}"
    record_header = {
        **header,
        "stream_index": record.stream_index,
        "scheme": record.scheme.value,
        "dt": record.dt if record.dt is not None else "none",
        "t_max": repr(record.t_max),
        "time_unit": record.time_unit,
    }
    events = pd.DataFrame(
        [(event.time, event.direction.value) for event in record.events],
        columns=["time", "direction"],
    )
    paths = [write_csv(events, out_dir / f"{stem}.events.csv", record_header)]
    if record.samples is not None:
        samples = pd.DataFrame({
            "t": record.samples.t,
            "prob_g": record.samples.prob_g,
            "prob_e": record.samples.prob_e,
        })
        paths.append(write_csv(samples, out_dir / f"{stem}.samples.csv", record_header))
    return paths


def ensemble_stats_frame(stats: EnsembleStats, comparison: MEComparisonReport) -> pd.DataFrame:
    return pd.DataFrame({
        "t": stats.grid,
        "J_gg": stats.j_gg,
        "J_ee": stats.j_ee,
        "Re_Jge": stats.j_ge.real,
        "Im_Jge": stats.j_ge.imag,
        "se_gg": stats.se_gg,
        "se_ee": stats.se_ee,
        "rho_gg": comparison.rho_gg,
        "rho_ee": comparison.rho_ee,
    })


def write_ensemble_stats(
    stats: EnsembleStats,
    comparison: MEComparisonReport,
    path: Path,
    header: Mapping[str, Any],
) -> Path:
    """Write per-bin averages next to the master-equation reference."""
    return write_csv(ensemble_stats_frame(stats, comparison), path, {**header, "n_trajectories": stats.n_trajectories})


def _ratio_label(ratio: float) -> str:
    return f"theta_r{ratio:g}"


def write_trace(trace: TemperatureTrace, out_dir: Path, header: Mapping[str, Any]) -> List[Path]:
    """
    Write one detection trace and its injected-events sidecar.

    Columns are u, delta_T_kelvin and one theta_r<ratio> per tau_ratio.
    """
    stem = f"trace_{trace.trajectory_index:06d}"
    columns = {"u": trace.u, "delta_T_kelvin": trace.delta_t}
    for ratio, theta in trace.theta.items():
        columns[_ratio_label(ratio)] = theta
    trace_header = {
        **header,
        "trajectory": trace.trajectory_index,
        "tau_ratios": ",".join(f"{ratio:g}" for ratio in trace.theta),
    }
    events = pd.DataFrame(
        [(event.u, event.sign) for event in trace.events],
        columns=["u_injected", "sign"],
    )
    return [
        write_csv(pd.DataFrame(columns), out_dir / f"{stem}.csv", trace_header),
        write_csv(events, out_dir / f"{stem}.events.csv", trace_header),
    ]
