"""Experiment driver: epochs, Monte Carlo trials, sweeps and file outputs."""

from __future__ import annotations

import copy
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .analysis import EquilibriumCertificate, PlayHistory, certify, collision_rate, save_history
from .config import ConfigSource, ScenarioValidationError, apply_overrides, load_config_source, scenario_from_mapping
from .feedback import UtilityMap, cpi_feedback
from .learning import ALGORITHMS, build_learner, equilibrium_rate
from .model import Scenario, ScenarioError, linear_to_db
from .params import LearnerParams, LearnerParamsValidator
from .processing import Detection, RdCube, detect_peak, process_cpi
from .runtime import RunReport, SimulationRuntime
from .scheduler import ChirpSchedule, action_schedule, stochastic_round_robin
from .tracing import SpanTracker, emit_event
from .waveform import AdcMatrix, fast_power_sim, synthesize_cpi_adc

FIDELITIES = ("fast", "waveform")

METRICS_COLUMNS = (
    "trial",
    "epoch",
    "radar",
    "action",
    "a",
    "b",
    "sinr_db",
    "utility",
    "collision_rate",
    "overlap_rate",
)
STRATEGY_COLUMNS = ("trial", "epoch", "radar", "action", "a", "b", "probability")
FEEDBACK_COLUMNS = ("trial", "epoch", "radar", "a", "b", "sinr_db", "snr_db")
SUMMARY_COLUMNS = ("epoch", "mean_sinr_db", "std_sinr_db", "collision_rate", "overlap_rate", "mean_utility")
SWEEP_COLUMNS = (
    "num_radars",
    "algorithm",
    "trials",
    "mean_sinr_db",
    "std_sinr_db",
    "final_collision_rate",
    "mean_utility",
)

_SPEC_KEYS = {
    "scenario",
    "algorithm",
    "epochs",
    "trials",
    "seed",
    "fidelity",
    "learner",
    "block_length",
    "output_dir",
    "workers",
    "overrides",
    "beta",
    "certify",
}


class ExperimentError(RuntimeError):
    """Raised when a trial fails; carries the 1-based trial and epoch."""

    def __init__(self, message: str, *, trial: Optional[int] = None, epoch: Optional[int] = None) -> None:
        super().__init__(message)
        self.trial = trial
        self.epoch = epoch


# ---------------------------------------------------------------------------
# experiment definition


@dataclass
class ExperimentSpec:
    """What to run: scenario document, algorithm, horizon, trials and outputs."""

    scenario: Dict[str, Any] = field(default_factory=dict)
    algorithm: str = "internal"
    epochs: Optional[int] = None
    trials: int = 1
    seed: int = 0
    fidelity: str = "fast"
    learner: Optional[Union[LearnerParams, Mapping[str, Any]]] = None
    block_length: int = 1
    output_dir: Path = Path("runs")
    workers: int = 1
    overrides: Tuple[str, ...] = ()
    beta: float = 2.0
    certify: bool = True

    def __post_init__(self) -> None:
        self.output_dir = Path(self.output_dir)
        self.overrides = tuple(self.overrides)
        errors: List[str] = []
        if self.algorithm not in ALGORITHMS:
            errors.append(f"algorithm: must be one of {', '.join(ALGORITHMS)}")
        if self.fidelity not in FIDELITIES:
            errors.append("fidelity: must be 'fast' or 'waveform'")
        if self.epochs is not None and (not isinstance(self.epochs, int) or self.epochs < 1):
            errors.append("epochs: must be an integer >= 1")
        for name in ("trials", "block_length", "workers"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                errors.append(f"{name}: must be an integer >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            errors.append("seed: must be a non-negative integer")
        if not self.beta > 0:
            errors.append("beta: must be > 0")
        if not isinstance(self.scenario, Mapping):
            errors.append("scenario: must be a mapping")
        if errors:
            raise ScenarioValidationError(errors)

    def scenario_document(self) -> Dict[str, Any]:
        document = copy.deepcopy(dict(self.scenario))
        apply_overrides(document, self.overrides)
        return document

    def learner_params(self, runtime: Optional[SimulationRuntime] = None) -> Optional[LearnerParams]:
        """Resolved parameters for the regret learners, ``None`` for the fixed baselines."""

        if self.algorithm not in ("external", "internal"):
            return None
        base = LearnerParams.for_algorithm(self.algorithm)
        if self.learner is not None:
            return LearnerParamsValidator.normalize(self.learner, base=base)
        if runtime is not None and runtime.learner is not None:
            return LearnerParamsValidator.normalize(runtime.learner, base=base)
        return base

    def to_dict(self) -> Dict[str, Any]:
        learner = self.learner.to_dict() if isinstance(self.learner, LearnerParams) else self.learner
        return {
            "scenario": copy.deepcopy(dict(self.scenario)),
            "algorithm": self.algorithm,
            "epochs": self.epochs,
            "trials": self.trials,
            "seed": self.seed,
            "fidelity": self.fidelity,
            "learner": dict(learner) if learner is not None else None,
            "block_length": self.block_length,
            "output_dir": str(self.output_dir),
            "workers": self.workers,
            "overrides": list(self.overrides),
            "beta": self.beta,
            "certify": self.certify,
        }


def load_experiment_spec(source: ConfigSource, **changes: Any) -> ExperimentSpec:
    """Build a spec from an experiment document or a bare scenario document.

    An experiment document has a ``scenario`` key holding a mapping or a path
    (relative paths resolve next to the experiment file). Keyword ``changes``
    replace document values.
    """

    document = load_config_source(source)
    base_dir: Optional[Path] = None
    if isinstance(source, (str, Path)):
        candidate = Path(source)
        try:
            if candidate.exists():
                base_dir = candidate.parent
        except OSError:
            base_dir = None

    if "scenario" not in document:
        document = {"scenario": document, "seed": int(document.get("seed", 0))}

    unknown = [f"{key}: unknown key" for key in document if key not in _SPEC_KEYS]
    if unknown:
        raise ScenarioValidationError(unknown)

    scenario = document["scenario"]
    if isinstance(scenario, str):
        path = Path(scenario)
        if base_dir is not None and not path.is_absolute() and (base_dir / path).exists():
            path = base_dir / path
        scenario = load_config_source(path if path.exists() else scenario)

    values: Dict[str, Any] = {key: value for key, value in document.items() if key != "scenario"}
    values["scenario"] = scenario
    if "overrides" in values:
        values["overrides"] = tuple(values["overrides"])
    values.update({key: value for key, value in changes.items() if value is not None})
    return ExperimentSpec(**values)


# ---------------------------------------------------------------------------
# per-trial state


@dataclass(frozen=True)
class MetricsRecord:
    """One row per (trial, epoch, radar)."""

    trial: int
    epoch: int
    radar: str
    action: int
    a: int
    b: int
    sinr_db: float
    utility: float
    collision_rate: float
    overlap_rate: float

    def to_row(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(eq=False)
class TrialState:
    trial: int
    scenario: Scenario
    learners: List[Any]
    utility_maps: List[UtilityMap]
    rng: np.random.Generator
    epochs: int
    algorithm: str = "internal"
    fidelity: str = "fast"
    block_length: int = 1
    beta: float = 2.0
    tracker: Optional[SpanTracker] = None
    profiles: List[List[int]] = field(default_factory=list)
    utilities: List[List[float]] = field(default_factory=list)
    records: List[MetricsRecord] = field(default_factory=list)
    strategy_rows: List[Dict[str, Any]] = field(default_factory=list)
    feedback_rows: List[Dict[str, Any]] = field(default_factory=list)
    cells: List[List[Optional[List[int]]]] = field(default_factory=list)
    last_schedules: List[ChirpSchedule] = field(default_factory=list)
    last_adc: Optional[List[AdcMatrix]] = None

    def history(self) -> PlayHistory:
        return PlayHistory(
            scenario=self.scenario,
            profiles=np.asarray(self.profiles, dtype=int),
            utilities=np.asarray(self.utilities, dtype=float),
            block_length=self.block_length,
            algorithm=self.algorithm,
            fidelity=self.fidelity,
            beta=self.beta,
            cells=self.cells if any(entry is not None for row in self.cells for entry in row) else None,
        )


def trial_seeds(seed: int, trials: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(trials)


def init_trial(
    spec: ExperimentSpec,
    trial: int,
    seed_sequence: np.random.SeedSequence,
    params: Optional[LearnerParams],
    *,
    epochs: Optional[int] = None,
    tracker: Optional[SpanTracker] = None,
) -> TrialState:
    """Re-randomise the scenario under the trial seed and start uniform learners."""

    geometry_seed = int(seed_sequence.generate_state(1)[0])
    scenario = scenario_from_mapping(spec.scenario_document(), seed=geometry_seed)
    space = scenario.action_space
    learners = [build_learner(spec.algorithm, index + 1, space, params) for index in range(scenario.num_radars)]
    utility_maps = [UtilityMap.for_scenario(scenario, index, beta=spec.beta) for index in range(scenario.num_radars)]
    return TrialState(
        trial=trial,
        scenario=scenario,
        learners=learners,
        utility_maps=utility_maps,
        rng=np.random.default_rng(seed_sequence),
        epochs=epochs or spec.epochs or scenario.epochs,
        algorithm=spec.algorithm,
        fidelity=spec.fidelity,
        block_length=spec.block_length,
        beta=spec.beta,
        tracker=tracker,
    )


def _cell_collision_rate(schedules: Sequence[ChirpSchedule], scenario: Scenario) -> float:
    if len({len(schedule) for schedule in schedules}) != 1:
        return float("nan")
    return collision_rate(schedules, scenario.action_space)


def draw_schedules(state: TrialState) -> Tuple[List[int], List[ChirpSchedule], List[Optional[List[int]]]]:
    """Played actions, schedules and logged cells of one CPI.

    The random baseline draws a fresh start every block and reports the cell of its
    first chirp as played; every other radar commits to one sampled action.
    """

    space = state.scenario.action_space
    played: List[int] = []
    schedules: List[ChirpSchedule] = []
    cells: List[Optional[List[int]]] = []
    for learner, radar in zip(state.learners, state.scenario.radars):
        if state.algorithm == "random":
            schedule = stochastic_round_robin(learner.strategy, state.block_length, radar.chirps, space, state.rng)
            flat = schedule.flat_indices(space)
            played.append(int(flat[0]))
            cells.append(flat.tolist())
        else:
            action = learner.strategy.sample(state.rng)
            schedule = action_schedule(action, state.block_length, radar.chirps, space)
            played.append(action)
            cells.append(None)
        schedules.append(schedule)
    return played, schedules, cells


def run_epoch(state: TrialState, epoch: int) -> List[MetricsRecord]:
    """Execute CPI ``epoch`` (1-based): draw, schedule, simulate, score and update."""

    scenario = state.scenario
    space = scenario.action_space
    tracker = state.tracker
    span_id = None
    if tracker is not None:
        span_id = tracker.start_span(
            kind="epoch",
            name=f"epoch-{epoch}",
            attributes={"trial": state.trial, "epoch": epoch},
        )
    try:
        played, schedules, cells = draw_schedules(state)
        if state.fidelity == "waveform":
            state.last_adc = synthesize_cpi_adc(scenario, schedules, state.rng)
            components: Sequence[Any] = state.last_adc
        else:
            powers = fast_power_sim(scenario, schedules)
            components = [powers[index] for index in range(scenario.num_radars)]
        state.last_schedules = schedules

        cell_rate = _cell_collision_rate(schedules, scenario)
        overlap_rate = collision_rate(schedules, space, mode="overlap", scenario=scenario)

        records: List[MetricsRecord] = []
        utilities: List[float] = []
        for index, radar in enumerate(scenario.radars):
            feedback = cpi_feedback(components[index], schedules[index], state.utility_maps[index], epoch=epoch)
            a, b = space.pair(played[index])
            for action, probability in enumerate(state.learners[index].strategy.probs):
                pa, pb = space.pair(action)
                state.strategy_rows.append(
                    {
                        "trial": state.trial,
                        "epoch": epoch,
                        "radar": radar.id,
                        "action": action,
                        "a": pa + 1,
                        "b": pb + 1,
                        "probability": float(probability),
                    }
                )
            for (fa, fb), sinr in sorted(feedback.sinr.items()):
                snr = feedback.snr.get((fa, fb))
                state.feedback_rows.append(
                    {
                        "trial": state.trial,
                        "epoch": epoch,
                        "radar": radar.id,
                        "a": fa,
                        "b": fb,
                        "sinr_db": linear_to_db(sinr),
                        "snr_db": linear_to_db(snr) if snr is not None else float("nan"),
                    }
                )
            record = MetricsRecord(
                trial=state.trial,
                epoch=epoch,
                radar=radar.id,
                action=played[index],
                a=a + 1,
                b=b + 1,
                sinr_db=feedback.mean_sinr_db,
                utility=feedback.utility,
                collision_rate=cell_rate,
                overlap_rate=overlap_rate,
            )
            emit_event(
                "epoch.feedback",
                attributes={
                    "radar": radar.id,
                    "action": played[index],
                    "utility": feedback.utility,
                    "sinr_db": feedback.mean_sinr_db,
                },
            )
            records.append(record)
            utilities.append(feedback.utility)

        for index, learner in enumerate(state.learners):
            learner.update(utilities[index], played[index], epoch, state.epochs)

        state.profiles.append(list(played))
        state.cells.append(cells)
        state.utilities.append(utilities)
        state.records.extend(records)
    except Exception as exc:
        if tracker is not None and span_id is not None:
            tracker.end_span(span_id, status="ERROR", error=str(exc))
        raise

    if tracker is not None and span_id is not None:
        tracker.end_span(
            span_id,
            attributes={
                "collision_rate": cell_rate,
                "overlap_rate": overlap_rate,
                "mean_sinr_db": float(np.mean([record.sinr_db for record in records])),
                "mean_utility": float(np.mean(utilities)),
            },
        )
    return records


@dataclass(eq=False)
class TrialResult:
    trial: int
    scenario: Scenario
    records: List[MetricsRecord]
    strategy_rows: List[Dict[str, Any]]
    feedback_rows: List[Dict[str, Any]]
    history: PlayHistory
    certificate: Optional[EquilibriumCertificate] = None


def run_trial(
    spec: ExperimentSpec,
    trial: int,
    seed_sequence: np.random.SeedSequence,
    params: Optional[LearnerParams],
    *,
    tracer: Any = None,
    trace_id: Optional[str] = None,
    parent_span_id: Optional[str] = None,
) -> TrialResult:
    """Run every epoch of 1-based ``trial`` on its own tracker."""

    tracker = SpanTracker(tracer, trace_id=trace_id)
    span_id = tracker.start_span(
        kind="trial",
        name=f"trial-{trial}",
        attributes={"trial": trial, "algorithm": spec.algorithm},
        parent_span_id=parent_span_id,
    )
    epoch = 0
    try:
        state = init_trial(spec, trial, seed_sequence, params, tracker=tracker)
        for epoch in range(1, state.epochs + 1):
            run_epoch(state, epoch)
        history = state.history()
        certificate = certify(history) if spec.certify else None
    except Exception as exc:
        tracker.emit_event(
            event_type="trial.error",
            level="error",
            message=str(exc),
            attributes={"trial": trial, "epoch": epoch, "exception_type": exc.__class__.__name__},
        )
        tracker.end_span(span_id, status="ERROR", error=str(exc))
        tracker.close()
        failed_epoch = epoch or None
        raise ExperimentError(f"trial {trial}, epoch {epoch}: {exc}", trial=trial, epoch=failed_epoch) from exc

    attributes: Dict[str, Any] = {"final_collision_rate": state.records[-1].collision_rate}
    if certificate is not None:
        attributes["epsilon_external"] = certificate.epsilon_external
        attributes["epsilon_internal"] = certificate.epsilon_internal
    tracker.end_span(span_id, attributes=attributes)
    tracker.close()
    return TrialResult(
        trial=trial,
        scenario=state.scenario,
        records=state.records,
        strategy_rows=state.strategy_rows,
        feedback_rows=state.feedback_rows,
        history=history,
        certificate=certificate,
    )


# ---------------------------------------------------------------------------
# experiments


@dataclass(eq=False)
class ExperimentResult:
    output_dir: Path
    metrics: pd.DataFrame
    summary: pd.DataFrame
    trials: List[TrialResult]
    files: Dict[str, Path] = field(default_factory=dict)

    @property
    def certificates(self) -> List[EquilibriumCertificate]:
        return [result.certificate for result in self.trials if result.certificate is not None]

    @property
    def histories(self) -> List[PlayHistory]:
        return [result.history for result in self.trials]

    def final_collision_rates(self) -> List[float]:
        last = self.metrics[self.metrics["epoch"] == self.metrics["epoch"].max()]
        return last.groupby("trial")["collision_rate"].first().tolist()


def summarise_metrics(metrics: pd.DataFrame) -> pd.DataFrame:
    """Per-epoch mean over trials of the radar-averaged metrics, with cross-trial std."""

    per_trial = (
        metrics.groupby(["trial", "epoch"])
        .agg(
            mean_sinr_db=("sinr_db", "mean"),
            collision_rate=("collision_rate", "first"),
            overlap_rate=("overlap_rate", "first"),
            mean_utility=("utility", "mean"),
        )
        .reset_index()
    )
    summary = (
        per_trial.groupby("epoch")
        .agg(
            mean_sinr_db=("mean_sinr_db", "mean"),
            std_sinr_db=("mean_sinr_db", lambda values: float(np.std(values))),
            collision_rate=("collision_rate", "mean"),
            overlap_rate=("overlap_rate", "mean"),
            mean_utility=("mean_utility", "mean"),
        )
        .reset_index()
    )
    return summary[list(SUMMARY_COLUMNS)]


def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False)
    emit_event("experiment.output", attributes={"path": str(path), "rows": int(len(frame))})
    return path


def _write_json(payload: Any, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    emit_event("experiment.output", attributes={"path": str(path)})
    return path


def write_outputs(
    spec: ExperimentSpec,
    results: Sequence[TrialResult],
    params: Optional[LearnerParams],
) -> Tuple[pd.DataFrame, pd.DataFrame, Dict[str, Path]]:
    out = spec.output_dir
    out.mkdir(parents=True, exist_ok=True)
    files: Dict[str, Path] = {}

    metrics = pd.DataFrame(
        [record.to_row() for result in results for record in result.records],
        columns=list(METRICS_COLUMNS),
    )
    strategies = pd.DataFrame(
        [row for result in results for row in result.strategy_rows],
        columns=list(STRATEGY_COLUMNS),
    )
    feedback = pd.DataFrame(
        [row for result in results for row in result.feedback_rows],
        columns=list(FEEDBACK_COLUMNS),
    )
    summary = summarise_metrics(metrics)

    files["metrics"] = _write_frame(metrics, out / "metrics.csv")
    files["strategies"] = _write_frame(strategies, out / "strategies.csv")
    files["feedback"] = _write_frame(feedback, out / "feedback.csv")
    files["summary"] = _write_frame(summary, out / "summary.csv")

    first = results[0].history
    size = len(first.scenario.action_space)
    certificates: Dict[str, Any] = {
        "algorithm": spec.algorithm,
        "theoretical": {
            "strategies": size,
            "horizon": first.epochs,
            "CCE": equilibrium_rate(size, first.epochs, "CCE"),
            "CE": equilibrium_rate(size, first.epochs, "CE"),
        },
        "trials": [
            {"trial": result.trial, **result.certificate.to_dict()}
            for result in results
            if result.certificate is not None
        ],
    }
    files["certificates"] = _write_json(certificates, out / "certificates.json")

    for result in results:
        path = save_history(result.history, out / "histories" / f"trial_{result.trial:03d}.json")
        emit_event("experiment.output", attributes={"path": str(path)})
        files[f"history_{result.trial}"] = path

    run_info = spec.to_dict()
    run_info["resolved_learner"] = params.to_dict() if params is not None else None
    files["run"] = _write_json(run_info, out / "run.json")
    return metrics, summary, files


def run_experiment(spec: ExperimentSpec, *, report: Optional[RunReport] = None) -> ExperimentResult:
    """Run ``spec.trials`` seeded trials and write every output under ``spec.output_dir``."""

    runtime = SimulationRuntime.current()
    params = spec.learner_params(runtime)
    # fail fast on a bad document before any worker starts
    scenario_from_mapping(spec.scenario_document(), seed=spec.seed)

    tracker = SpanTracker(runtime.tracer)
    span_id = tracker.start_span(
        kind="experiment",
        name=spec.algorithm,
        attributes={
            "algorithm": spec.algorithm,
            "trials": spec.trials,
            "fidelity": spec.fidelity,
            "seed": spec.seed,
        },
    )
    if report is not None:
        report.trace_id = tracker.trace_id
        report.failed_trial = None
        report.failed_epoch = None
        report.summary = None
        report.learner_snapshot = params.to_dict() if params is not None else {}

    seeds = trial_seeds(spec.seed, spec.trials)

    def _run(index: int) -> TrialResult:
        return run_trial(
            spec,
            index + 1,
            seeds[index],
            params,
            tracer=runtime.tracer,
            trace_id=tracker.trace_id,
            parent_span_id=span_id,
        )

    try:
        if spec.workers > 1:
            with ThreadPoolExecutor(max_workers=min(spec.workers, os.cpu_count() or 1)) as pool:
                results = list(pool.map(_run, range(spec.trials)))
        else:
            results = [_run(index) for index in range(spec.trials)]
        metrics, summary, files = write_outputs(spec, results, params)
    except Exception as exc:
        if report is not None:
            report.summary = str(exc)
            if isinstance(exc, ExperimentError):
                report.failed_trial = exc.trial
                report.failed_epoch = exc.epoch
        tracker.end_span(span_id, status="ERROR", error=str(exc))
        tracker.close()
        raise

    tracker.end_span(
        span_id,
        attributes={
            "final_collision_rate": float(summary["collision_rate"].iloc[-1]),
            "final_mean_sinr_db": float(summary["mean_sinr_db"].iloc[-1]),
        },
    )
    tracker.close()
    return ExperimentResult(
        output_dir=spec.output_dir,
        metrics=metrics,
        summary=summary,
        trials=list(results),
        files=files,
    )


def run_sweep(spec: ExperimentSpec, radar_counts: Iterable[int]) -> pd.DataFrame:
    """Rerun ``spec`` for every radar count and write ``sweep.csv``."""

    if "radars" in spec.scenario:
        raise ScenarioValidationError(["radars: a sweep needs geometry-generated radars"])
    rows: List[Dict[str, Any]] = []
    for count in radar_counts:
        point = replace(
            spec,
            overrides=spec.overrides + (f"geometry.num_radars={int(count)}",),
            output_dir=spec.output_dir / f"radars_{int(count)}",
        )
        result = run_experiment(point)
        per_trial = result.metrics.groupby("trial")["sinr_db"].mean()
        rows.append(
            {
                "num_radars": int(count),
                "algorithm": spec.algorithm,
                "trials": spec.trials,
                "mean_sinr_db": float(per_trial.mean()),
                "std_sinr_db": float(np.std(per_trial.to_numpy())),
                "final_collision_rate": float(np.mean(result.final_collision_rates())),
                "mean_utility": float(result.metrics["utility"].mean()),
            }
        )
    sweep = pd.DataFrame(rows, columns=list(SWEEP_COLUMNS))
    spec.output_dir.mkdir(parents=True, exist_ok=True)
    sweep.to_csv(spec.output_dir / "sweep.csv", index=False)
    return sweep


# ---------------------------------------------------------------------------
# range-Doppler export


@dataclass(eq=False)
class RdExport:
    csv_path: Path
    json_path: Path
    cube: RdCube
    detection: Detection
    truth: List[Dict[str, float]]


def _resolve_radar(scenario: Scenario, radar: Union[int, str]) -> int:
    if isinstance(radar, str) and not radar.isdigit():
        return scenario.radar_index(radar)
    index = int(radar)
    if not 1 <= index <= scenario.num_radars:
        raise ScenarioError(f"radar {index} is outside 1..{scenario.num_radars}")
    return index - 1


def export_rd_cube(
    spec: ExperimentSpec,
    radar: Union[int, str],
    *,
    epoch: Optional[int] = None,
    trial: int = 1,
) -> RdExport:
    """Replay ``trial`` up to ``epoch`` and export the radar's range-Doppler magnitudes.

    The CSV carries one ``cell`` row per (m, q, p) and one ``truth`` row per target.
    """

    if spec.fidelity != "waveform":
        raise ExperimentError(f"range-Doppler export needs waveform fidelity, got '{spec.fidelity}'")
    if trial < 1 or trial > spec.trials:
        raise ExperimentError(f"trial {trial} is outside 1..{spec.trials}", trial=trial)

    runtime = SimulationRuntime.current()
    params = spec.learner_params(runtime)
    seed_sequence = trial_seeds(spec.seed, trial)[-1]
    tracker = SpanTracker(runtime.tracer)
    span_id = tracker.start_span(kind="experiment", name="rdmap", attributes={"radar": str(radar), "trial": trial})
    current = 0
    try:
        state = init_trial(spec, trial, seed_sequence, params, tracker=tracker)
        target_epoch = epoch or state.epochs
        if not 1 <= target_epoch <= state.epochs:
            raise ExperimentError(f"epoch {target_epoch} is outside 1..{state.epochs}", trial=trial)
        for current in range(1, target_epoch + 1):
            run_epoch(state, current)

        index = _resolve_radar(state.scenario, radar)
        radar_params = state.scenario.radars[index]
        assert state.last_adc is not None
        cube = process_cpi(state.last_adc[index], state.last_schedules[index], radar_params)
        detection = detect_peak(cube)

        frame = cube.to_frame()
        frame.insert(0, "kind", "cell")
        truth = [
            {"range_m": target.range, "velocity_mps": target.velocity, "rcs_dbsm": target.rcs_dbsm}
            for target in state.scenario.targets[index]
        ]
        truth_rows = pd.DataFrame(
            [
                {
                    "kind": "truth",
                    "m": -1,
                    "q": -1,
                    "p": -1,
                    "range_m": item["range_m"],
                    "velocity_mps": item["velocity_mps"],
                    "magnitude_db": math.nan,
                }
                for item in truth
            ],
            columns=list(frame.columns),
        )
        out = spec.output_dir
        out.mkdir(parents=True, exist_ok=True)
        stem = f"rdcube_{radar_params.id}_epoch{target_epoch:03d}"
        csv_path = _write_frame(pd.concat([frame, truth_rows], ignore_index=True), out / f"{stem}.csv")
        json_path = _write_json(
            {
                "radar": radar_params.id,
                "algorithm": spec.algorithm,
                "trial": trial,
                "epoch": target_epoch,
                "detection": asdict(detection),
                "truth": truth,
            },
            out / f"{stem}.json",
        )
    except ExperimentError as exc:
        tracker.end_span(span_id, status="ERROR", error=str(exc))
        tracker.close()
        raise
    except Exception as exc:
        tracker.end_span(span_id, status="ERROR", error=str(exc))
        tracker.close()
        raise ExperimentError(f"trial {trial}, epoch {current}: {exc}", trial=trial, epoch=current or None) from exc

    tracker.end_span(span_id, attributes={"peak_range_m": detection.range, "peak_velocity_mps": detection.velocity})
    tracker.close()
    return RdExport(csv_path=csv_path, json_path=json_path, cube=cube, detection=detection, truth=truth)


__all__ = [
    "FIDELITIES",
    "METRICS_COLUMNS",
    "STRATEGY_COLUMNS",
    "FEEDBACK_COLUMNS",
    "SUMMARY_COLUMNS",
    "SWEEP_COLUMNS",
    "ExperimentError",
    "ExperimentSpec",
    "load_experiment_spec",
    "MetricsRecord",
    "TrialState",
    "trial_seeds",
    "init_trial",
    "draw_schedules",
    "run_epoch",
    "TrialResult",
    "run_trial",
    "ExperimentResult",
    "summarise_metrics",
    "write_outputs",
    "run_experiment",
    "run_sweep",
    "RdExport",
    "export_rd_cube",
]
