"""hopping CLI entrypoint for experiments, certification and regret bounds."""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, TextIO, Tuple

from noregret_hopping.analysis import certify, load_history
from noregret_hopping.harness import (
    ExperimentSpec,
    export_rd_cube,
    load_experiment_spec,
    run_experiment,
    run_sweep,
)
from noregret_hopping.learning import (
    ALGORITHMS,
    equilibrium_rate,
    regret_bound_external,
    regret_bound_internal,
    theoretical_schedule,
)
from noregret_hopping.model import ScenarioError
from noregret_hopping.params import LearnerParams, LearnerParamsValidationError
from noregret_hopping.runtime import RunReport, SimulationRuntime
from noregret_hopping.tracing import ConsoleTracer, SQLiteTracer


class CLIError(Exception):
    """Raised when CLI parameters are invalid."""


_NO_TRACER = object()


def _json_dumps(payload: Any, *, pretty: bool) -> str:
    return json.dumps(payload, indent=2 if pretty else None, ensure_ascii=False)


def _emit(payload: Any, *, args: argparse.Namespace, stdout: TextIO) -> None:
    text = _json_dumps(payload, pretty=getattr(args, "pretty", False))
    output = getattr(args, "output", None)
    if output is not None:
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(text, encoding="utf-8")
    else:
        stdout.write(text + "\n")


def _report_to_markdown(report: RunReport) -> str:
    data = report.to_dict()
    learner_json = json.dumps(data.get("learner_snapshot", {}), indent=2, ensure_ascii=False)
    lines = [
        "# noregret-hopping Failure Report",
        "",
        f"- trace_id: {data.get('trace_id') or '-'}",
        f"- failed_trial: {data.get('failed_trial') or '-'}",
        f"- failed_epoch: {data.get('failed_epoch') or '-'}",
        f"- summary: {data.get('summary') or '-'}",
        "",
        "## Learner Snapshot",
        "```json",
        learner_json,
        "```",
        "",
    ]
    return "\n".join(lines)


def _write_failure_report(report: RunReport, *, path: Path, fmt: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "markdown":
        payload = _report_to_markdown(report)
    else:
        payload = json.dumps(report.to_dict(), indent=2, ensure_ascii=False)
    path.write_text(payload, encoding="utf-8")


def _append_runtime_log(report: RunReport, *, log_path: Path) -> None:
    entry = {"timestamp": datetime.now(timezone.utc).isoformat(), **report.to_dict()}
    log_path.parent.mkdir(parents=True, exist_ok=True)
    with log_path.open("a", encoding="utf-8") as handle:
        handle.write(json.dumps(entry, ensure_ascii=False) + "\n")


def _print_failure_summary(report: RunReport, *, stderr: TextIO) -> None:
    snapshot = report.learner_snapshot or {}
    learner = ", ".join(f"{key}={value}" for key, value in snapshot.items()) or "-"
    stderr.write("Experiment failed.\n")
    stderr.write(f"  trace_id: {report.trace_id or '-'}\n")
    stderr.write(f"  failed_trial: {report.failed_trial or '-'}\n")
    stderr.write(f"  failed_epoch: {report.failed_epoch or '-'}\n")
    stderr.write(f"  reason: {report.summary or '-'}\n")
    stderr.write(f"  learner: {learner}\n\n")


def _resolve_tracer(name: Optional[str], trace_db: Path, *, stream: TextIO) -> Any:
    """Instantiate tracer based on CLI option; ``None`` keeps the runtime tracer."""

    if name is None:
        return None
    key = name.strip().lower()
    if key in {"none", "off"}:
        return _NO_TRACER
    if key in {"console", "stdout"}:
        return ConsoleTracer(stream=stream)
    if key in {"sqlite", "db"}:
        trace_db.parent.mkdir(parents=True, exist_ok=True)
        return SQLiteTracer(db_path=trace_db)
    raise CLIError(f"Unknown tracer: {name}")


def _close_tracer(tracer: Any) -> None:
    if tracer is None or tracer is _NO_TRACER:
        return
    close = getattr(tracer, "close", None)
    if callable(close):
        close()


def _learner_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if getattr(args, "eta", None) is not None:
        overrides["eta"] = args.eta
    if getattr(args, "gamma", None) is not None:
        overrides["gamma"] = args.gamma
        overrides.setdefault("gamma_end", args.gamma if args.gamma_schedule == "constant" else 0.0)
    if getattr(args, "gamma_schedule", None) is not None:
        overrides["gamma_schedule"] = args.gamma_schedule
    if getattr(args, "no_positive_part", False):
        overrides["positive_part"] = False
    return overrides


def _build_spec(args: argparse.Namespace, **forced: Any) -> ExperimentSpec:
    changes: Dict[str, Any] = {
        "algorithm": getattr(args, "algo", None),
        "epochs": getattr(args, "epochs", None),
        "trials": getattr(args, "trials", None),
        "seed": getattr(args, "seed", None),
        "fidelity": getattr(args, "fidelity", None),
        "block_length": getattr(args, "block_length", None),
        "workers": getattr(args, "workers", None),
        "output_dir": getattr(args, "out", None),
    }
    changes.update(forced)
    spec = load_experiment_spec(args.spec, **changes)
    if args.set:
        for item in args.set:
            if "=" not in item:
                raise CLIError("--set requires KEY=VALUE format")
        spec.overrides = spec.overrides + tuple(args.set)

    overrides = _learner_overrides(args)
    if overrides:
        current = spec.learner.to_dict() if isinstance(spec.learner, LearnerParams) else dict(spec.learner or {})
        current.update(overrides)
        spec.learner = current
    return spec


def _execute(
    args: argparse.Namespace,
    action: Callable[[ExperimentSpec, RunReport], Any],
    *,
    stdout: TextIO,
    stderr: TextIO,
    forced: Optional[Dict[str, Any]] = None,
) -> Tuple[int, Any]:
    """Build the ExperimentSpec, install the runtime, run ``action`` and handle failures."""

    try:
        spec = _build_spec(args, **(forced or {}))
        desired_tracer = _resolve_tracer(args.tracer, args.trace_db, stream=stderr)
    except (CLIError, ScenarioError, LearnerParamsValidationError, OSError) as exc:
        stderr.write(f"{exc}\n")
        return 1, None

    previous_runtime = SimulationRuntime.current()
    if desired_tracer is _NO_TRACER:
        tracer_to_use = None
    else:
        tracer_to_use = desired_tracer if desired_tracer is not None else previous_runtime.tracer

    report = RunReport()
    failure_exc: Optional[Exception] = None
    result = None
    try:
        SimulationRuntime.configure(tracer=tracer_to_use, learner=previous_runtime.learner)
        result = action(spec, report)
    except Exception as exc:
        failure_exc = exc
    finally:
        SimulationRuntime.configure(tracer=previous_runtime.tracer, learner=previous_runtime.learner)
        if args.tracer is not None:
            _close_tracer(desired_tracer)

    if failure_exc is not None:
        if report.summary is None:
            report.summary = str(failure_exc)
        if args.report_path is not None:
            try:
                _write_failure_report(report, path=args.report_path, fmt=args.report_format)
            except Exception as exc:  # pragma: no cover - filesystem errors
                stderr.write(f"Failed to write report: {exc}\n")
        try:
            _append_runtime_log(report, log_path=args.log_dir / "runtime_execution.log")
        except Exception as exc:  # pragma: no cover - filesystem errors
            stderr.write(f"Failed to append runtime log: {exc}\n")
        _print_failure_summary(report, stderr=stderr)
        return 1, None
    return 0, result


def handle_run(args: argparse.Namespace, *, stdout: TextIO, stderr: TextIO) -> int:
    """Execute the `run` command."""

    code, result = _execute(
        args,
        lambda spec, report: run_experiment(spec, report=report),
        stdout=stdout,
        stderr=stderr,
    )
    if code != 0:
        return code
    summary = result.summary
    certificates = result.certificates
    payload = {
        "output_dir": str(result.output_dir),
        "trials": len(result.trials),
        "epochs": int(summary["epoch"].max()),
        "final_collision_rate": float(summary["collision_rate"].iloc[-1]),
        "final_overlap_rate": float(summary["overlap_rate"].iloc[-1]),
        "final_mean_sinr_db": float(summary["mean_sinr_db"].iloc[-1]),
        "epsilon_external": max((cert.epsilon_external for cert in certificates), default=None),
        "epsilon_internal": max((cert.epsilon_internal for cert in certificates), default=None),
        "files": {key: str(path) for key, path in result.files.items() if not key.startswith("history_")},
    }
    _emit(payload, args=args, stdout=stdout)
    return 0


def handle_sweep(args: argparse.Namespace, *, stdout: TextIO, stderr: TextIO) -> int:
    """Execute the `sweep` command."""

    counts: List[int] = list(args.radars)
    code, sweep = _execute(
        args,
        lambda spec, report: run_sweep(spec, counts),
        stdout=stdout,
        stderr=stderr,
    )
    if code != 0:
        return code
    _emit(sweep.to_dict(orient="records"), args=args, stdout=stdout)
    return 0


def handle_rdmap(args: argparse.Namespace, *, stdout: TextIO, stderr: TextIO) -> int:
    """Execute the `rdmap` command."""

    code, export = _execute(
        args,
        lambda spec, report: export_rd_cube(spec, args.radar, epoch=args.epoch, trial=args.trial),
        stdout=stdout,
        stderr=stderr,
        forced={"fidelity": args.fidelity},
    )
    if code != 0:
        return code
    payload = {
        "csv": str(export.csv_path),
        "json": str(export.json_path),
        "detection": {
            "range_m": export.detection.range,
            "velocity_mps": export.detection.velocity,
        },
        "truth": export.truth,
    }
    _emit(payload, args=args, stdout=stdout)
    return 0


def handle_certify(args: argparse.Namespace, *, stdout: TextIO, stderr: TextIO) -> int:
    """Execute the `certify` command."""

    try:
        history = load_history(args.history)
    except (OSError, ValueError, KeyError) as exc:
        stderr.write(f"Failed to load history: {exc}\n")
        return 1
    certificate = certify(history, tolerance=args.tolerance)
    payload = certificate.to_dict()
    if not args.series:
        payload.pop("external_series")
        payload.pop("internal_series")
    _emit(payload, args=args, stdout=stdout)
    return 0


def handle_bounds(args: argparse.Namespace, *, stdout: TextIO, stderr: TextIO) -> int:
    """Execute the `bounds` command."""

    try:
        schedule = theoretical_schedule(args.n, args.horizon, args.regime, kappa=args.kappa)
        gamma = min(schedule.gamma, args.gamma_max)
        external = regret_bound_external(args.n, args.horizon, schedule.eta, gamma, gamma_max=args.gamma_max)
        internal = regret_bound_internal(args.n, args.horizon, schedule.eta, gamma, gamma_max=args.gamma_max)
    except ScenarioError as exc:
        stderr.write(f"{exc}\n")
        return 1
    payload = {
        "strategies": args.n,
        "horizon": args.horizon,
        "regime": schedule.regime,
        "eta": schedule.eta,
        "gamma": gamma,
        "external_bound": external,
        "internal_bound": internal,
        "average_external_bound": external / args.horizon,
        "cce_rate": equilibrium_rate(args.n, args.horizon, "CCE"),
        "ce_rate": equilibrium_rate(args.n, args.horizon, "CE"),
    }
    _emit(payload, args=args, stdout=stdout)
    return 0


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--spec", required=True, help="Experiment or scenario YAML/JSON path.")
    parser.add_argument("--algo", choices=ALGORITHMS, help="Strategy-update algorithm.")
    parser.add_argument("--epochs", type=int, help="Number of CPIs per trial.")
    parser.add_argument("--trials", type=int, help="Number of Monte Carlo trials.")
    parser.add_argument("--seed", type=int, help="Experiment seed.")
    parser.add_argument("--block-length", type=int, help="Round-robin block length.")
    parser.add_argument("--workers", type=int, help="Worker threads for trials.")
    parser.add_argument("--out", type=Path, help="Output directory.")
    parser.add_argument("--set", action="append", help="Override scenario fields (KEY=VALUE).")
    parser.add_argument("--eta", type=float, help="Learner step size.")
    parser.add_argument("--gamma", type=float, help="Exploration rate.")
    parser.add_argument("--gamma-schedule", choices=("constant", "linear"), help="Exploration schedule.")
    parser.add_argument("--no-positive-part", action="store_true", help="Disable the positive part on internal scores.")
    parser.add_argument("--tracer", help="Tracer backend (console/sqlite/none).")
    parser.add_argument("--trace-db", type=Path, default=Path("hopping_trace.db"), help="SQLite tracer output path.")
    parser.add_argument("--output", "-o", type=Path, help="Write the JSON result to file.")
    parser.add_argument("--pretty", action="store_true", help="Pretty-print JSON output.")
    parser.add_argument("--report-path", type=Path, help="Write failure summary to file.")
    parser.add_argument(
        "--report-format",
        choices=("json", "markdown"),
        default="json",
        help="Failure report format (json/markdown).",
    )
    parser.add_argument(
        "--log-dir",
        type=Path,
        default=Path("logs"),
        help="Directory for runtime_execution.log.",
    )


def build_parser() -> argparse.ArgumentParser:
    """Construct CLI argument parser."""

    parser = argparse.ArgumentParser(description="No-regret time-frequency hopping for FMCW radars.")
    subparsers = parser.add_subparsers(dest="command")

    run_parser = subparsers.add_parser("run", help="Run an experiment and write metrics.")
    _add_common_options(run_parser)
    run_parser.add_argument("--fidelity", choices=("fast", "waveform"), help="Simulation fidelity.")
    run_parser.set_defaults(func=handle_run)

    sweep_parser = subparsers.add_parser("sweep", help="Repeat an experiment over radar counts.")
    _add_common_options(sweep_parser)
    sweep_parser.add_argument("--fidelity", choices=("fast", "waveform"), help="Simulation fidelity.")
    sweep_parser.add_argument("--radars", type=int, nargs="+", required=True, help="Radar counts to sweep.")
    sweep_parser.set_defaults(func=handle_sweep)

    rdmap_parser = subparsers.add_parser("rdmap", help="Export a range-Doppler map for one radar.")
    _add_common_options(rdmap_parser)
    rdmap_parser.add_argument("--fidelity", choices=("fast", "waveform"), default="waveform", help="Simulation fidelity.")
    rdmap_parser.add_argument("--radar", required=True, help="1-based radar index or radar id.")
    rdmap_parser.add_argument("--epoch", type=int, help="Epoch to export (default: last).")
    rdmap_parser.add_argument("--trial", type=int, default=1, help="Trial to replay.")
    rdmap_parser.set_defaults(func=handle_rdmap)

    certify_parser = subparsers.add_parser("certify", help="Certify a logged play history.")
    certify_parser.add_argument("--history", type=Path, required=True, help="History JSON written by run.")
    certify_parser.add_argument("--tolerance", type=float, default=0.0, help="ε_int at or below which play is a CE.")
    certify_parser.add_argument("--series", action="store_true", help="Include prefix regret series.")
    certify_parser.add_argument("--output", "-o", type=Path, help="Write the certificate to file.")
    certify_parser.add_argument("--pretty", action="store_true", help="Pretty-print JSON output.")
    certify_parser.set_defaults(func=handle_certify)

    bounds_parser = subparsers.add_parser("bounds", help="Print theoretical schedules and regret bounds.")
    bounds_parser.add_argument("--n", type=int, required=True, help="Number of pure strategies.")
    bounds_parser.add_argument("--horizon", type=int, required=True, help="Number of epochs.")
    bounds_parser.add_argument("--regime", choices=("explored", "unexplored"), default="explored")
    bounds_parser.add_argument("--kappa", type=float, default=1.0, help="Step-size multiplier.")
    bounds_parser.add_argument("--gamma-max", type=float, default=0.5, help="Exploration cap.")
    bounds_parser.add_argument("--output", "-o", type=Path, help="Write the result to file.")
    bounds_parser.add_argument("--pretty", action="store_true", help="Pretty-print JSON output.")
    bounds_parser.set_defaults(func=handle_bounds)

    return parser


def main(
    argv: Optional[Sequence[str]] = None,
    *,
    stdout: TextIO = sys.stdout,
    stderr: TextIO = sys.stderr,
) -> int:
    """CLI main entry."""

    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help(file=stdout)
        return 1
    return args.func(args, stdout=stdout, stderr=stderr)


def app() -> None:
    """Console script entrypoint."""

    sys.exit(main())


__all__ = ["app", "main", "build_parser", "CLIError"]
