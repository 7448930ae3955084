"""Command-line interface: rates, ensemble, guardian and calorimeter subcommands."""

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from . import __version__
from .analysis.ensemble import compare_to_me, default_grid
from .analysis.measurement import guardian_summary, survival_checkpoints
from .models.schemas import RunConfig
from .physics.calorimeter import heat_capacity_over_kb, summarize_detection, thermometer_tracking
from .physics.rates import compute_rates, rates_report
from .pipeline.ensemble_runner import EnsembleRunner
from .storage.writers import (
    provenance,
    read_events,
    to_jsonable,
    write_ensemble_stats,
    write_events,
    write_json,
    write_trace,
    write_trajectory_record,
)
from .utils.config import load_run_config, settings, write_config_echo
from .utils.errors import ConfigurationError
from .utils.logger import get_event_logger, get_logger, setup_logging

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

N_SURVIVAL_CHECKPOINTS = 10
GUARDIAN_MIN_DECAY_TIMES = 20.0

# Reference absorber: gamma = 100 J m^-3 K^-2, V = (0.1 um)^3
REFERENCE_SOMMERFELD = 100.0
REFERENCE_VOLUME_M3 = 1e-21


def _output_dir(config: RunConfig) -> Path:
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _checkpoint_times(t_max: float) -> List[float]:
    return [t_max * k / N_SURVIVAL_CHECKPOINTS for k in range(1, N_SURVIVAL_CHECKPOINTS + 1)]


def cmd_rates(config: RunConfig) -> Dict[str, Any]:
    """
    Report the transition rates and detailed-balance residual.

    Args:
        config: Resolved run config

    Returns:
        Rates report (also written to rates.json)
    """
    report = rates_report(config.qubit)
    out_dir = _output_dir(config)
    write_json(report, out_dir / "rates.json")
    write_config_echo(config, out_dir)
    return report


def cmd_ensemble(config: RunConfig, runner: EnsembleRunner) -> Dict[str, Any]:
    """
    Run N trajectories, aggregate them and compare with the master equation.

    Writes events.csv, the saved trajectory files, ensemble_stats.csv and
    me_comparison.json.

    Args:
        config: Resolved run config
        runner: Ensemble runner

    Returns:
        Comparison report
    """
    params = config.qubit
    state0 = config.initial_state.to_state()
    grid = default_grid(config.ensemble.t_max, config.ensemble.n_bins)

    result = runner.run_trajectories(params, config, grid=grid)
    comparison = compare_to_me(result.stats)
    rates = compute_rates(params)

    report = {
        "n_trajectories": result.n,
        "n_bins": int(grid.size),
        "max_abs_deviation_ee": comparison.max_deviation,
        "max_abs_deviation_ge": comparison.max_deviation_ge,
        "max_standard_error_ee": comparison.max_standard_error,
        "within_4_standard_errors": comparison.within_four_se,
        "fraction_bins_abs_z_gt_3": comparison.fraction_outliers,
        "coherence_decay_rate_fit": comparison.coherence_decay_rate,
        "coherence_decay_rate_expected": comparison.expected_decay_rate,
        "clicks": {
            "N_e": result.tally.n_e,
            "N_g": result.tally.n_g,
            "N_silent": result.tally.n_silent,
        },
        "survival_checkpoints": survival_checkpoints(
            result.tally, state0, rates, _checkpoint_times(config.ensemble.t_max)
        ),
    }

    out_dir = _output_dir(config)
    header = provenance(config, "ensemble")
    write_events(result.events, out_dir / "events.csv", header)
    for record in result.saved:
        write_trajectory_record(record, out_dir / "trajectories", header)
    write_ensemble_stats(result.stats, comparison, out_dir / "ensemble_stats.csv", header)
    write_json(report, out_dir / "me_comparison.json")
    write_config_echo(config, out_dir)

    if not comparison.within_four_se:
        logger.warning(
            f"max|J_ee - rho_ee| = {comparison.max_deviation:.3e} exceeds 4 x max SE "
            f"({comparison.max_standard_error:.3e})"
        )
    return report


def _guardian_config(config: RunConfig) -> RunConfig:
    """Extend t_max so that all but a negligible fraction of click-ups are seen."""
    rates = compute_rates(config.qubit)
    minimum = GUARDIAN_MIN_DECAY_TIMES / rates.gamma_down
    if config.ensemble.t_max >= minimum:
        return config
    logger.info(f"Extending t_max from {config.ensemble.t_max} to {minimum} (20/Gamma_down) for guardian counting")
    ensemble = config.ensemble.model_copy(update={"t_max": minimum})
    return config.model_copy(update={"ensemble": ensemble})


def cmd_guardian(config: RunConfig, runner: EnsembleRunner, silent_as_click_down: bool = True) -> Dict[str, Any]:
    """
    Tally guardian-photon clicks and compare energy moments with theory.

    Args:
        config: Resolved run config
        runner: Ensemble runner
        silent_as_click_down: Classify jump-free trajectories as click-down

    Returns:
        Guardian summary (also written to guardian_summary.json)
    """
    config = _guardian_config(config)
    params = config.qubit
    state0 = config.initial_state.to_state()
    rates = compute_rates(params)

    result = runner.run_trajectories(params, config)
    summary = guardian_summary(result.tally, state0, rates, params.e_q_kelvin, silent_as_click_down)
    summary["survival_checkpoints"] = survival_checkpoints(
        result.tally, state0, rates, _checkpoint_times(config.ensemble.t_max)
    )

    out_dir = _output_dir(config)
    write_events(result.events, out_dir / "events.csv", provenance(config, "guardian"))
    write_json(summary, out_dir / "guardian_summary.json")
    write_config_echo(config, out_dir)
    return summary


def _calorimeter_config(config: RunConfig) -> RunConfig:
    """Qubit at the superbath temperature, trajectories spanning the trace window."""
    if config.calorimeter is None:
        raise ConfigurationError("calorimeter.tau_ratios is required (config file or --tau-ratio)")
    calorimeter = config.calorimeter
    qubit = config.qubit

    beta_hw = qubit.e_q_kelvin / calorimeter.t0_kelvin
    if not math.isclose(beta_hw, qubit.beta_hw, rel_tol=1e-12):
        logger.info(
            f"Rates computed at T0 = {calorimeter.t0_kelvin} K (beta_hw = {beta_hw}) "
            f"instead of configured beta_hw = {qubit.beta_hw}"
        )
    ensemble = config.ensemble.model_copy(update={"t_max": calorimeter.window_u * qubit.gamma_down_tau})
    return config.model_copy(update={
        "qubit": qubit.model_copy(update={"beta_hw": beta_hw}),
        "ensemble": ensemble,
    })


def cmd_calorimeter(config: RunConfig, runner: EnsembleRunner) -> Dict[str, Any]:
    """
    Simulate absorber temperature and thermometer traces for N trajectories.

    Args:
        config: Resolved run config (calorimeter section required)
        runner: Ensemble runner

    Returns:
        Detection summary (also written to calorimeter_summary.json)
    """
    config = _calorimeter_config(config)
    calorimeter = config.calorimeter

    saved_events = None
    if config.trajectories_file:
        if config.temperature_feedback:
            raise ConfigurationError("temperature_feedback cannot replay saved trajectories")
        saved_events = read_events(Path(config.trajectories_file))

    _, traces = runner.run_detection(config.qubit, config, saved_events=saved_events)
    detection = summarize_detection(traces, calorimeter)

    tracking: Dict[float, Dict[str, float]] = {}
    for trace in traces:
        for ratio, values in thermometer_tracking(trace).items():
            entry = tracking.setdefault(ratio, {"max_abs_deviation_kelvin": 0.0, "max_excursion_kelvin": 0.0})
            entry["max_abs_deviation_kelvin"] = max(entry["max_abs_deviation_kelvin"], values["max_abs_deviation_kelvin"])
            entry["max_excursion_kelvin"] = max(entry["max_excursion_kelvin"], values["excursion_kelvin"])

    summary = detection.model_dump()
    summary.update({
        "tau_ratios": list(calorimeter.tau_ratios),
        "temperature_feedback": config.temperature_feedback,
        "thermometer_tracking": {f"{ratio:g}": values for ratio, values in tracking.items()},
        "reference_heat_capacity_over_kb": heat_capacity_over_kb(
            REFERENCE_SOMMERFELD, REFERENCE_VOLUME_M3, calorimeter.t0_kelvin
        ),
    })

    out_dir = _output_dir(config)
    header = provenance(config, "calorimeter")
    for trace in traces:
        write_trace(trace, out_dir / "traces", header)
    write_json(summary, out_dir / "calorimeter_summary.json")
    write_config_echo(config, out_dir)
    return summary


def _parse_tau_ratios(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid tau ratio list: {text}") from e


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", help="Path to JSON config file")
    parser.add_argument("--seed", type=int, help="Master seed (0 .. 2^64-1)")
    parser.add_argument("--out", "-o", help="Output directory")
    parser.add_argument("--beta-hw", help="beta*hbar*omega_Q, or 'inf' for T=0")
    parser.add_argument("--log-level", help="Logging level (default: LOG_LEVEL)")


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, help="Number of trajectories")
    parser.add_argument("--prob-e", type=float, help="Initial excited population |b(0)|^2")
    parser.add_argument("--t-max", type=float, help="Trajectory length in 1/Gamma_down(T=0)")
    parser.add_argument("--scheme", choices=["fixed", "waiting"], help="Trajectory scheme")
    parser.add_argument("--workers", type=int, help="Worker processes (default: WORKERS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qjcal",
        description="Quantum-jump trajectories of a qubit in a resistive bath and calorimetric detection",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", help="Command to execute")

    # Rates command
    rates_parser = subparsers.add_parser("rates", help="Print transition rates as JSON")
    _add_common_arguments(rates_parser)

    # Ensemble command
    ensemble_parser = subparsers.add_parser("ensemble", help="Trajectory ensemble vs master equation")
    _add_common_arguments(ensemble_parser)
    _add_run_arguments(ensemble_parser)

    # Guardian command
    guardian_parser = subparsers.add_parser("guardian", help="Guardian-photon click statistics")
    _add_common_arguments(guardian_parser)
    _add_run_arguments(guardian_parser)
    guardian_parser.add_argument(
        "--exclude-silent",
        action="store_true",
        help="Drop trajectories without any jump instead of counting them as click-down",
    )

    # Calorimeter command
    calorimeter_parser = subparsers.add_parser("calorimeter", help="Absorber temperature traces and SNR")
    _add_common_arguments(calorimeter_parser)
    _add_run_arguments(calorimeter_parser)
    calorimeter_parser.add_argument("--tau-ratio", type=_parse_tau_ratios, help="Comma list of tau/tau_th values")
    calorimeter_parser.add_argument("--no-noise", action="store_true", help="Disable the heat-current noise")
    calorimeter_parser.add_argument("--trajectories", help="Replay an events.csv from a previous run")
    calorimeter_parser.add_argument(
        "--temperature-feedback",
        action="store_true",
        help="Recompute rates from the instantaneous absorber temperature",
    )

    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Translate CLI flags into a nested RunConfig override dict."""
    overrides: Dict[str, Any] = {}

    def put(section: Optional[str], key: str, value: Any) -> None:
        if value is None:
            return
        if section is None:
            overrides[key] = value
        else:
            overrides.setdefault(section, {})[key] = value

    put(None, "seed", args.seed)
    put(None, "output_dir", args.out)
    put("qubit", "beta_hw", args.beta_hw)
    put("ensemble", "n", getattr(args, "n", None))
    put("ensemble", "t_max", getattr(args, "t_max", None))
    put("ensemble", "scheme", getattr(args, "scheme", None))
    put("initial_state", "prob_e", getattr(args, "prob_e", None))
    put("calorimeter", "tau_ratios", getattr(args, "tau_ratio", None))
    put(None, "trajectories_file", getattr(args, "trajectories", None))
    if getattr(args, "no_noise", False):
        put("calorimeter", "noise_enabled", False)
    if getattr(args, "temperature_feedback", False):
        put(None, "temperature_feedback", True)
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_VALIDATION

    setup_logging(log_level=args.log_level or settings.log_level, log_file=settings.log_file or None)
    events = get_event_logger(subcommand=args.command)

    try:
        config = load_run_config(args.config, collect_overrides(args))
        workers = getattr(args, "workers", None) or settings.workers
        runner = EnsembleRunner(workers=workers, chunk_size=config.ensemble.chunk_size)
        events.info("run_started", seed=config.seed, n=config.ensemble.n, workers=workers)

        if args.command == "rates":
            report = cmd_rates(config)
            print(json.dumps(to_jsonable(report), indent=2, sort_keys=True))

        elif args.command == "ensemble":
            report = cmd_ensemble(config, runner)
            print(f"\n✓ Ensemble of {report['n_trajectories']} trajectories written to {config.output_dir}")
            print(f"  max|J_ee - rho_ee|: {report['max_abs_deviation_ee']:.3e}")
            print(f"  within 4 SE: {report['within_4_standard_errors']}")

        elif args.command == "guardian":
            report = cmd_guardian(config, runner, silent_as_click_down=not args.exclude_silent)
            print(f"\n✓ Guardian clicks written to {config.output_dir}")
            print(f"  N_e/N: {report['p_hat']:.4f} (expected {report['p_analytic']:.4f})")
            print(f"  <E>: {report['mean_E']:.4f} (expected {report['mean_E_analytic']:.4f})")

        elif args.command == "calorimeter":
            report = cmd_calorimeter(config, runner)
            snr = report["ensemble_snr"]
            print(f"\n✓ {report['n_traces']} detection traces written to {config.output_dir}")
            print(f"  SNR: {'n/a' if snr is None else f'{snr:.3f}'} (analytic {report['analytic_snr']:.3f})")

    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        events.error("run_failed", category="validation", error=str(e))
        print(f"\n✗ Error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:
        logger.error(f"Command failed: {e}")
        events.error("run_failed", category="runtime", error=str(e))
        print(f"\n✗ Error: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    events.info("run_finished", output_dir=config.output_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
