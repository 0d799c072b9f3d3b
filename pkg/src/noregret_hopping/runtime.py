"""Runtime configuration helpers for simulation runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, ClassVar, Mapping, Optional, Union

from .params import LearnerParams, LearnerParamsValidator
from .tracing import ConsoleTracer

if TYPE_CHECKING:  # pragma: no cover - typing helper
    from .harness import ExperimentResult, ExperimentSpec


@dataclass
class RunReport:
    """Summary object capturing experiment failure details."""

    trace_id: Optional[str] = None
    failed_trial: Optional[int] = None
    failed_epoch: Optional[int] = None
    summary: Optional[str] = None
    learner_snapshot: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Mapping[str, Any]:
        return {
            "trace_id": self.trace_id,
            "failed_trial": self.failed_trial,
            "failed_epoch": self.failed_epoch,
            "summary": self.summary,
            "learner_snapshot": dict(self.learner_snapshot),
        }


class SimulationRuntime:
    """Execution-time configuration: the tracer and default learner parameters."""

    __slots__ = ("tracer", "learner")
    _global: ClassVar[Optional["SimulationRuntime"]] = None

    def __init__(
        self,
        *,
        tracer: Any = None,
        learner: Optional[Union[LearnerParams, Mapping[str, Any]]] = None,
    ) -> None:
        self.tracer = tracer
        # None lets each algorithm fall back to its own defaults
        self.learner = None if learner is None else LearnerParamsValidator.normalize(learner)

    @classmethod
    def default(cls) -> "SimulationRuntime":
        return cls(tracer=ConsoleTracer())

    @classmethod
    def configure(
        cls,
        *,
        tracer: Any = None,
        learner: Optional[Union[LearnerParams, Mapping[str, Any]]] = None,
    ) -> "SimulationRuntime":
        cls._global = cls(tracer=tracer, learner=learner)
        return cls._global

    @classmethod
    def current(cls) -> "SimulationRuntime":
        if cls._global is None:
            cls._global = cls.default()
        return cls._global

    def run(self, spec: "ExperimentSpec", *, report: Optional[RunReport] = None) -> "ExperimentResult":
        from .harness import run_experiment

        previous = self.__class__._global
        self.__class__._global = self
        try:
            return run_experiment(spec, report=report)
        finally:
            self.__class__._global = previous


__all__ = [
    "RunReport",
    "SimulationRuntime",
]
