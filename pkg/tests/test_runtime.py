from __future__ import annotations

from pathlib import Path

import pytest

from noregret_hopping.harness import ExperimentSpec
from noregret_hopping.params import LearnerParams, LearnerParamsValidationError
from noregret_hopping.runtime import RunReport, SimulationRuntime
from noregret_hopping.tracing import ConsoleTracer


@pytest.fixture(autouse=True)
def isolated_runtime(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setattr(SimulationRuntime, "_global", None)


def test_current_defaults_to_console_tracer() -> None:
    runtime = SimulationRuntime.current()

    assert isinstance(runtime.tracer, ConsoleTracer)
    assert runtime.learner is None
    assert SimulationRuntime.current() is runtime


def test_configure_replaces_global_runtime() -> None:
    runtime = SimulationRuntime.configure(tracer=None, learner={"eta": 0.25})

    assert SimulationRuntime.current() is runtime
    assert isinstance(runtime.learner, LearnerParams)
    assert runtime.learner.eta == 0.25


def test_invalid_learner_defaults_are_rejected() -> None:
    with pytest.raises(LearnerParamsValidationError):
        SimulationRuntime(learner={"eta": -1.0})


def test_run_installs_and_restores_runtime(tmp_path: Path) -> None:
    previous = SimulationRuntime.configure(tracer=None)
    runtime = SimulationRuntime(tracer=None, learner={"eta": 0.2})
    spec = ExperimentSpec(
        scenario={"radar_defaults": {"chirps": 16}},
        algorithm="internal",
        epochs=2,
        output_dir=tmp_path / "run",
        certify=False,
    )
    report = RunReport()

    result = runtime.run(spec, report=report)

    assert SimulationRuntime.current() is previous
    assert report.learner_snapshot["eta"] == 0.2
    assert report.failed_trial is None
    assert report.trace_id
    assert len(result.metrics) == 2 * 4


def test_run_report_to_dict() -> None:
    report = RunReport(trace_id="abc", failed_trial=2, failed_epoch=7, summary="boom", learner_snapshot={"eta": 0.5})

    assert report.to_dict() == {
        "trace_id": "abc",
        "failed_trial": 2,
        "failed_epoch": 7,
        "summary": "boom",
        "learner_snapshot": {"eta": 0.5},
    }
