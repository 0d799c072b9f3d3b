from __future__ import annotations

import io
import json
import sqlite3
from pathlib import Path
from typing import Any, List, Tuple

import pandas as pd
import pytest

import noregret_hopping.harness as harness
from noregret_hopping.cli import main as cli_main
from noregret_hopping.learning import regret_bound_external
from noregret_hopping.runtime import SimulationRuntime


@pytest.fixture(autouse=True)
def quiet_runtime(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setattr(SimulationRuntime, "_global", SimulationRuntime(tracer=None))


@pytest.fixture()
def scenario_file(tmp_path: Path) -> Path:
    path = tmp_path / "scene.yaml"
    path.write_text("radar_defaults:\n  chirps: 16\n", encoding="utf-8")
    return path


def invoke(argv: List[str]) -> Tuple[int, str, str]:
    stdout = io.StringIO()
    stderr = io.StringIO()
    code = cli_main(argv, stdout=stdout, stderr=stderr)
    return code, stdout.getvalue(), stderr.getvalue()


def run_args(scenario_file: Path, out: Path, *extra: Any) -> List[str]:
    return [
        "run",
        "--spec",
        str(scenario_file),
        "--algo",
        "external",
        "--epochs",
        "3",
        "--out",
        str(out),
        "--tracer",
        "none",
        *[str(item) for item in extra],
    ]


def test_run_prints_summary_and_certify_reads_history(tmp_path: Path, scenario_file: Path) -> None:
    code, stdout, stderr = invoke(run_args(scenario_file, tmp_path / "run"))

    assert code == 0, stderr
    payload = json.loads(stdout)
    assert payload["trials"] == 1
    assert payload["epochs"] == 3
    assert 0.0 <= payload["final_collision_rate"] <= 1.0
    assert payload["epsilon_internal"] >= payload["epsilon_external"] - 1e-12
    assert {"metrics", "strategies", "feedback", "summary", "certificates", "run"} <= set(payload["files"])

    history = tmp_path / "run" / "histories" / "trial_001.json"
    code, stdout, _ = invoke(["certify", "--history", str(history)])
    assert code == 0
    certificate = json.loads(stdout)
    assert certificate["kind"] in {"CE", "CCE"}
    assert certificate["horizon"] == 3
    assert "external_series" not in certificate
    assert certificate["epsilon_internal"] == pytest.approx(payload["epsilon_internal"])

    code, stdout, _ = invoke(["certify", "--history", str(history), "--series"])
    assert code == 0
    assert all(len(series) == 3 for series in json.loads(stdout)["internal_series"].values())


def test_run_applies_overrides_and_learner_options(tmp_path: Path, scenario_file: Path) -> None:
    out = tmp_path / "run"

    code, _, stderr = invoke(run_args(scenario_file, out, "--set", "geometry.num_radars=2", "--eta", "0.3"))

    assert code == 0, stderr
    metrics = pd.read_csv(out / "metrics.csv")
    assert metrics["radar"].nunique() == 2
    run_info = json.loads((out / "run.json").read_text(encoding="utf-8"))
    assert run_info["resolved_learner"]["eta"] == 0.3
    assert run_info["overrides"] == ["geometry.num_radars=2"]


def test_run_writes_sqlite_trace(tmp_path: Path, scenario_file: Path) -> None:
    db_path = tmp_path / "trace.db"
    argv = run_args(scenario_file, tmp_path / "run", "--trace-db", db_path)
    argv[argv.index("--tracer") + 1] = "sqlite"

    code, _, stderr = invoke(argv)

    assert code == 0, stderr
    with sqlite3.connect(db_path) as conn:
        kinds = [row[0] for row in conn.execute("SELECT kind FROM spans")]
        feedback_events = conn.execute("SELECT COUNT(*) FROM events WHERE event_type = 'epoch.feedback'").fetchone()[0]
    assert kinds.count("experiment") == 1
    assert kinds.count("trial") == 1
    assert kinds.count("epoch") == 3
    assert feedback_events == 3 * 4


def test_run_failure_writes_report_and_log(
    tmp_path: Path, scenario_file: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    def explode(*args: Any, **kwargs: Any):
        raise RuntimeError("feedback exploded")

    monkeypatch.setattr(harness, "cpi_feedback", explode)
    report_path = tmp_path / "report.md"
    log_dir = tmp_path / "logs"

    code, _, stderr = invoke(
        run_args(
            scenario_file,
            tmp_path / "run",
            "--report-path",
            report_path,
            "--report-format",
            "markdown",
            "--log-dir",
            log_dir,
        )
    )

    assert code == 1
    assert stderr.startswith("Experiment failed.")
    assert "failed_epoch: 1" in stderr
    report = report_path.read_text(encoding="utf-8")
    assert report.splitlines()[0] == "# noregret-hopping Failure Report"
    assert "- failed_trial: 1" in report
    assert "feedback exploded" in report
    entries = (log_dir / "runtime_execution.log").read_text(encoding="utf-8").splitlines()
    assert len(entries) == 1
    entry = json.loads(entries[0])
    assert entry["failed_epoch"] == 1
    assert entry["learner_snapshot"]["eta"] == pytest.approx(0.1252)


def test_invalid_options_fail_before_running(tmp_path: Path, scenario_file: Path) -> None:
    code, _, stderr = invoke(run_args(scenario_file, tmp_path / "run", "--trials", "0"))

    assert code == 1
    assert "trials: must be an integer >= 1" in stderr
    assert not (tmp_path / "run").exists()

    code, _, stderr = invoke(run_args(scenario_file, tmp_path / "run", "--set", "no-equals-sign"))
    assert code == 1
    assert "KEY=VALUE" in stderr

    argv = run_args(scenario_file, tmp_path / "run")
    argv[argv.index("--tracer") + 1] = "carrier-pigeon"
    code, _, stderr = invoke(argv)
    assert code == 1
    assert "Unknown tracer" in stderr


def test_certify_reports_unreadable_history(tmp_path: Path) -> None:
    code, _, stderr = invoke(["certify", "--history", str(tmp_path / "missing.json")])

    assert code == 1
    assert stderr.startswith("Failed to load history")


def test_bounds_prints_theoretical_schedule() -> None:
    code, stdout, _ = invoke(["bounds", "--n", "21", "--horizon", "15"])

    assert code == 0
    payload = json.loads(stdout)
    assert payload["regime"] == "explored"
    assert payload["eta"] == pytest.approx(0.1252, abs=1e-3)
    assert payload["gamma"] == 0.5
    assert payload["external_bound"] == pytest.approx(regret_bound_external(21, 15, payload["eta"], 0.5))
    assert payload["internal_bound"] == pytest.approx(21 * payload["external_bound"])
    assert payload["average_external_bound"] == pytest.approx(payload["external_bound"] / 15)
    assert payload["ce_rate"] > payload["cce_rate"]

    code, _, stderr = invoke(["bounds", "--n", "1", "--horizon", "15"])
    assert code == 1
    assert stderr


def test_rdmap_exports_csv(tmp_path: Path) -> None:
    spec = tmp_path / "solo.yaml"
    spec.write_text(
        "\n".join(
            [
                "radar_defaults:",
                "  b_mhz: 150",
                "  chirps: 32",
                "graph:",
                "  kind: none",
                "radars:",
                "  - id: solo",
                "    position_m: [0.0, 0.0]",
                "    targets:",
                "      - range_m: 25.0",
                "        velocity_mps: -10.0",
                "",
            ]
        ),
        encoding="utf-8",
    )

    code, stdout, stderr = invoke(
        [
            "rdmap",
            "--spec",
            str(spec),
            "--algo",
            "random",
            "--epochs",
            "1",
            "--radar",
            "1",
            "--out",
            str(tmp_path / "rd"),
            "--tracer",
            "none",
        ]
    )

    assert code == 0, stderr
    payload = json.loads(stdout)
    assert Path(payload["csv"]).name == "rdcube_solo_epoch001.csv"
    assert Path(payload["csv"]).exists()
    assert payload["truth"] == [{"range_m": 25.0, "velocity_mps": -10.0, "rcs_dbsm": 20.0}]


def test_missing_subcommand_prints_help() -> None:
    code, stdout, _ = invoke([])

    assert code == 1
    assert "usage" in stdout.lower()
