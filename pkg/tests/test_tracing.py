from __future__ import annotations

import io
import json
import sqlite3
from pathlib import Path
from typing import Any, Mapping

from noregret_hopping.tracing import ConsoleTracer, SpanTracker, SQLiteTracer, emit_event


class ExplodingTracer:
    def on_span_start(self, span: Mapping[str, Any]) -> None:
        raise RuntimeError("start failed")

    def on_span_end(self, span: Mapping[str, Any]) -> None:
        raise RuntimeError("end failed")

    def on_event(self, event: Mapping[str, Any]) -> None:
        raise RuntimeError("event failed")


def test_console_tracer_writes_indented_lines() -> None:
    stream = io.StringIO()
    tracker = SpanTracker(ConsoleTracer(stream=stream, enable_color=False))

    trial = tracker.start_span(kind="trial", name="trial-1")
    epoch = tracker.start_span(kind="epoch", name="epoch-1")
    emit_event("epoch.feedback", attributes={"radar": "r1", "utility": 0.123456})
    tracker.end_span(epoch, attributes={"collision_rate": 0.25})
    tracker.end_span(trial, status="ERROR", error="boom")
    tracker.close()

    lines = stream.getvalue().splitlines()
    assert lines[0] == "[TRIAL] start name=trial-1"
    assert lines[1] == "  [EPOCH] start name=epoch-1"
    assert lines[2] == "    [epoch.feedback] radar=r1 utility=0.1235"
    assert lines[3] == "  [EPOCH] end status=OK collision_rate=0.25"
    assert lines[4] == "[TRIAL] end status=ERROR error=boom"


def test_console_tracer_can_hide_info_events() -> None:
    stream = io.StringIO()
    tracker = SpanTracker(ConsoleTracer(stream=stream, enable_color=False, show_events=False))

    span = tracker.start_span(kind="epoch", name="epoch-1")
    emit_event("epoch.feedback", attributes={"radar": "r1"})
    emit_event("trial.error", level="error", message="bad feedback")
    tracker.end_span(span)
    tracker.close()

    output = stream.getvalue()
    assert "epoch.feedback" not in output
    assert "[trial.error] bad feedback" in output


def test_sqlite_tracer_persists_spans_and_events(tmp_path: Path) -> None:
    db_path = tmp_path / "trace.db"
    tracer = SQLiteTracer(db_path=db_path)
    tracker = SpanTracker(tracer)

    experiment = tracker.start_span(kind="experiment", name="internal", attributes={"trials": 2})
    epoch = tracker.start_span(kind="epoch", name="epoch-1")
    tracker.emit_event(event_type="learner.stationary", attributes={"iterations": 12})
    tracker.end_span(epoch, attributes={"collision_rate": 0.5})
    tracker.end_span(experiment)
    tracker.close()
    tracer.close()

    with sqlite3.connect(db_path) as conn:
        spans = conn.execute("SELECT span_id, parent_span_id, kind, status, attributes, end_time FROM spans").fetchall()
        events = conn.execute("SELECT span_id, event_type, attributes FROM events").fetchall()

    by_kind = {row[2]: row for row in spans}
    assert set(by_kind) == {"experiment", "epoch"}
    assert by_kind["epoch"][1] == experiment
    assert by_kind["epoch"][3] == "OK"
    assert json.loads(by_kind["epoch"][4]) == {"collision_rate": 0.5}
    assert json.loads(by_kind["experiment"][4]) == {"trials": 2}
    assert all(row[5] is not None for row in spans)
    assert events == [(epoch, "learner.stationary", json.dumps({"iterations": 12}))]


def test_close_ends_open_spans(tmp_path: Path) -> None:
    db_path = tmp_path / "trace.db"
    tracer = SQLiteTracer(db_path=db_path)
    tracker = SpanTracker(tracer, trace_id="fixed-trace")

    tracker.start_span(kind="trial", name="trial-1")
    tracker.close()
    tracer.close()

    with sqlite3.connect(db_path) as conn:
        rows = conn.execute("SELECT trace_id, status, end_time, service_name FROM spans").fetchall()

    assert len(rows) == 1
    assert rows[0][0] == "fixed-trace"
    assert rows[0][1] == "OK"
    assert rows[0][2] is not None
    assert rows[0][3] == "noregret-hopping"


def test_emit_event_outside_span_is_ignored() -> None:
    stream = io.StringIO()

    emit_event("epoch.feedback", attributes={"radar": "r1"})
    tracker = SpanTracker(ConsoleTracer(stream=stream, enable_color=False))
    emit_event("epoch.feedback", attributes={"radar": "r1"})
    tracker.emit_event(event_type="epoch.feedback")
    tracker.close()

    assert stream.getvalue() == ""


def test_tracer_failures_do_not_escape() -> None:
    tracker = SpanTracker(ExplodingTracer())

    span = tracker.start_span(kind="epoch", name="epoch-1")
    emit_event("epoch.feedback")
    tracker.end_span(span)
    tracker.start_span(kind="epoch", name="epoch-2")
    tracker.close()


def test_trackers_nest_and_restore_context() -> None:
    stream = io.StringIO()
    outer = SpanTracker(ConsoleTracer(stream=stream, enable_color=False))
    span = outer.start_span(kind="experiment", name="run")

    inner = SpanTracker(None, trace_id=outer.trace_id)
    inner_span = inner.start_span(kind="trial", name="trial-1")
    emit_event("epoch.feedback")
    inner.end_span(inner_span)
    inner.close()

    emit_event("experiment.output", attributes={"rows": 3})
    outer.end_span(span)
    outer.close()

    output = stream.getvalue()
    assert "epoch.feedback" not in output
    assert "[experiment.output] rows=3" in output
