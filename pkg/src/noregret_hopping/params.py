"""Learner parameter objects and their validator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Mapping, Optional, Union


@dataclass
class LearnerParams:
    """Step size and exploration settings shared by the regret learners."""

    eta: float = 0.1252
    gamma: float = 0.1
    gamma_end: float = 0.0
    gamma_schedule: str = "linear"
    gamma_max: float = 0.5
    positive_part: bool = False

    def gamma_at(self, epoch: int, epochs: int) -> float:
        """Exploration rate at 1-based ``epoch`` of a run lasting ``epochs``."""

        if self.gamma_schedule == "constant" or epochs <= 1:
            return self.gamma
        fraction = min(max((epoch - 1) / (epochs - 1), 0.0), 1.0)
        return self.gamma + (self.gamma_end - self.gamma) * fraction

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eta": self.eta,
            "gamma": self.gamma,
            "gamma_end": self.gamma_end,
            "gamma_schedule": self.gamma_schedule,
            "gamma_max": self.gamma_max,
            "positive_part": self.positive_part,
        }

    @classmethod
    def for_algorithm(cls, algorithm: str) -> "LearnerParams":
        if algorithm == "internal":
            return cls(eta=0.5, gamma=0.0, gamma_end=0.0, gamma_schedule="constant", positive_part=True)
        if algorithm == "external":
            return cls()
        return cls(eta=0.0, gamma=0.0, gamma_end=0.0, gamma_schedule="constant")


def _clone_params(params: LearnerParams) -> LearnerParams:
    return LearnerParams(**params.to_dict())


def _merge_params(base: LearnerParams, override: Mapping[str, Any]) -> LearnerParams:
    values = base.to_dict()
    for key in values:
        if key in override:
            values[key] = override[key]
    values["eta"] = float(values["eta"])
    values["gamma"] = float(values["gamma"])
    values["gamma_end"] = float(values["gamma_end"])
    values["gamma_max"] = float(values["gamma_max"])
    values["gamma_schedule"] = str(values["gamma_schedule"]).lower()
    return LearnerParams(**values)


class LearnerParamsValidationError(ValueError):
    """Raised when learner parameters contain invalid values."""

    def __init__(self, errors: Iterable[str]) -> None:
        messages = list(errors)
        super().__init__("; ".join(messages) if messages else "Invalid learner parameters")
        self.errors = messages


def _finite(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


class LearnerParamsValidator:
    """Validate parameter instances and mapping definitions."""

    _ALLOWED_SCHEDULES = {"constant", "linear"}
    _KEYS = {"eta", "gamma", "gamma_end", "gamma_schedule", "gamma_max", "positive_part"}

    @classmethod
    def validate(cls, params: LearnerParams, *, allow_zero_eta: bool = False) -> LearnerParams:
        errors: list[str] = []

        if not _finite(params.eta) or params.eta < 0 or (params.eta == 0 and not allow_zero_eta):
            errors.append("eta must be a finite number > 0")
        if not _finite(params.gamma_max) or not 0 < params.gamma_max < 1:
            errors.append("gamma_max must lie in (0, 1)")
            gamma_max = 1.0
        else:
            gamma_max = params.gamma_max
        for name in ("gamma", "gamma_end"):
            value = getattr(params, name)
            if not _finite(value) or value < 0 or value > gamma_max:
                errors.append(f"{name} must lie in [0, gamma_max]")
        if params.gamma_schedule not in cls._ALLOWED_SCHEDULES:
            errors.append("gamma_schedule must be 'constant' or 'linear'")
        if not isinstance(params.positive_part, bool):
            errors.append("positive_part must be a boolean")

        if errors:
            raise LearnerParamsValidationError(errors)
        return params

    @classmethod
    def normalize(
        cls,
        params: Optional[Union[LearnerParams, Mapping[str, Any]]],
        *,
        base: Optional[LearnerParams] = None,
        allow_zero_eta: bool = False,
    ) -> LearnerParams:
        base_params = _clone_params(base) if base is not None else LearnerParams()
        cls.validate(base_params, allow_zero_eta=allow_zero_eta)

        if params is None:
            return base_params
        if isinstance(params, LearnerParams):
            return cls.validate(_clone_params(params), allow_zero_eta=allow_zero_eta)
        if isinstance(params, Mapping):
            cls._validate_mapping(params)
            return cls.validate(_merge_params(base_params, params), allow_zero_eta=allow_zero_eta)
        raise LearnerParamsValidationError(["Unsupported learner parameter definition type"])

    @classmethod
    def from_dict(
        cls,
        config: Mapping[str, Any],
        *,
        base: Optional[LearnerParams] = None,
    ) -> LearnerParams:
        if not isinstance(config, Mapping):
            raise LearnerParamsValidationError(["Learner definition must be a mapping"])
        return cls.normalize(config, base=base)

    @classmethod
    def _validate_mapping(cls, config: Mapping[str, Any]) -> None:
        errors: list[str] = []

        for key in config:
            if key not in cls._KEYS:
                errors.append(f"learner.{key}: unknown key")
        for key in ("eta", "gamma", "gamma_end", "gamma_max"):
            if key in config and not _finite(config[key]):
                errors.append(f"learner.{key}: must be a finite number")
        if "gamma_schedule" in config:
            if str(config["gamma_schedule"]).lower() not in cls._ALLOWED_SCHEDULES:
                errors.append("learner.gamma_schedule: must be 'constant' or 'linear'")
        if "positive_part" in config and not isinstance(config["positive_part"], bool):
            errors.append("learner.positive_part: must be a boolean")

        if errors:
            raise LearnerParamsValidationError(errors)


__all__ = [
    "LearnerParams",
    "LearnerParamsValidationError",
    "LearnerParamsValidator",
]
