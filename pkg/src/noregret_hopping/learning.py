"""Semi-bandit regret minimisers, parameter schedules and regret bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import softmax

from .model import ActionSpace, MixedStrategy, ScenarioError, nash_assignment, uniform_strategy
from .params import LearnerParams, LearnerParamsValidator
from .tracing import emit_event

SCORE_CAP = 1e6
STATIONARY_TOLERANCE = 1e-10
STATIONARY_MAX_ITERATIONS = 1_000_000
_POLISH_FACTOR = 1e-4
_STALL_LIMIT = 200

ALGORITHMS = ("random", "nash", "external", "internal")


class StationaryDistributionError(RuntimeError):
    """Raised when power iteration does not reach the residual tolerance."""

    def __init__(self, residual: float, iterations: int) -> None:
        super().__init__(f"stationary distribution did not converge: residual={residual:.3e} after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


@dataclass(eq=False)
class ExternalDualState:
    scores: np.ndarray

    @classmethod
    def zeros(cls, size: int) -> "ExternalDualState":
        return cls(scores=np.zeros(size))


@dataclass(eq=False)
class InternalDualState:
    """Row scores z_σ(σ') and the row-stochastic matrix Q built from them."""

    scores: np.ndarray
    transition: np.ndarray

    @classmethod
    def zeros(cls, size: int) -> "InternalDualState":
        return cls(scores=np.zeros((size, size)), transition=np.full((size, size), 1.0 / size))


# ---------------------------------------------------------------------------
# estimation and updates


def iw_estimate(utility: float, played: int, strategy: MixedStrategy, gamma: float) -> np.ndarray:
    """Importance-weighted utility vector; loss-based form when ``gamma`` is zero."""

    probability = strategy[played]
    if probability <= 0:
        raise ScenarioError(f"played strategy {played} has zero probability")
    if gamma != 0:
        estimate = np.zeros(len(strategy))
        estimate[played] = utility / probability
    else:
        estimate = np.ones(len(strategy))
        estimate[played] = 1.0 - (1.0 - utility) / probability
    return estimate


def _mix(probs: np.ndarray, gamma: float) -> np.ndarray:
    size = probs.shape[-1]
    return (1.0 - gamma) * probs + gamma / size


def _shift_scores(scores: np.ndarray) -> np.ndarray:
    # softmax is invariant to per-row constant shifts
    peak = np.max(np.abs(scores))
    if peak <= SCORE_CAP:
        return scores
    return scores - np.max(scores, axis=-1, keepdims=True)


def external_update(
    state: ExternalDualState,
    estimate: np.ndarray,
    eta: float,
    gamma: float,
) -> Tuple[MixedStrategy, ExternalDualState]:
    scores = _shift_scores(state.scores + eta * np.asarray(estimate, dtype=float))
    probs = _mix(softmax(scores), gamma)
    return MixedStrategy(probs / probs.sum()), ExternalDualState(scores=scores)


def internal_update(
    state: InternalDualState,
    estimate: np.ndarray,
    strategy: MixedStrategy,
    eta: float,
    gamma: float,
    *,
    positive_part: bool = True,
) -> Tuple[MixedStrategy, InternalDualState]:
    scores = state.scores + eta * np.outer(strategy.probs, np.asarray(estimate, dtype=float))
    scores = _shift_scores(scores)
    working = np.maximum(scores, 0.0) if positive_part else scores
    transition = _mix(softmax(working, axis=1), gamma)
    transition = transition / transition.sum(axis=1, keepdims=True)
    stationary = stationary_distribution(transition, initial=strategy)
    return stationary, InternalDualState(scores=scores, transition=transition)


def stationary_distribution(
    transition: np.ndarray,
    *,
    initial: Optional[MixedStrategy] = None,
    tolerance: float = STATIONARY_TOLERANCE,
    max_iterations: int = STATIONARY_MAX_ITERATIONS,
) -> MixedStrategy:
    """Left fixed point p = pQ by power iteration on the lazy chain (Q + I) / 2."""

    matrix = np.asarray(transition, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ScenarioError("transition matrix must be square")
    if np.any(matrix < 0) or not np.allclose(matrix.sum(axis=1), 1.0, atol=1e-9):
        raise ScenarioError("transition matrix must be row-stochastic")
    size = matrix.shape[0]
    probs = np.full(size, 1.0 / size) if initial is None else np.array(initial.probs, dtype=float)

    def residual_of(vector: np.ndarray) -> float:
        return float(np.abs(vector @ matrix - vector).sum())

    residual = residual_of(probs)
    polish = tolerance * _POLISH_FACTOR
    best = residual
    stalled = 0
    iterations = 0
    while residual > polish and iterations < max_iterations:
        iterations += 1
        probs = 0.5 * (probs + probs @ matrix)
        probs = probs / probs.sum()
        residual = residual_of(probs)
        if residual < best * (1.0 - 1e-3):
            best = residual
            stalled = 0
        else:
            stalled += 1
            if stalled >= _STALL_LIMIT and residual <= tolerance:
                break

    emit_event(
        "learner.stationary",
        attributes={"iterations": iterations, "residual": residual},
    )
    if residual > tolerance:
        raise StationaryDistributionError(residual, iterations)
    probs = np.clip(probs, 0.0, None)
    return MixedStrategy(probs / probs.sum())


# ---------------------------------------------------------------------------
# learners


class FixedStrategyLearner:
    """Baseline whose strategy never changes (uniform random play or a Nash point mass)."""

    def __init__(self, strategy: MixedStrategy) -> None:
        self._strategy = strategy

    @property
    def strategy(self) -> MixedStrategy:
        return self._strategy

    def update(self, utility: float, played: int, epoch: int, epochs: int) -> MixedStrategy:
        return self._strategy


class ExternalRegretLearner:
    """Entropic score update with softmax exploitation and uniform exploration."""

    def __init__(self, size: int, params: LearnerParams) -> None:
        self.params = params
        self.state = ExternalDualState.zeros(size)
        self._strategy = uniform_strategy(size)

    @property
    def strategy(self) -> MixedStrategy:
        return self._strategy

    def update(self, utility: float, played: int, epoch: int, epochs: int) -> MixedStrategy:
        gamma_now = self.params.gamma_at(epoch, epochs)
        estimate = iw_estimate(utility, played, self._strategy, gamma_now)
        gamma_next = self.params.gamma_at(epoch + 1, epochs)
        self._strategy, self.state = external_update(self.state, estimate, self.params.eta, gamma_next)
        return self._strategy


class InternalRegretLearner:
    """Row-wise updates whose stationary distribution is the played strategy."""

    def __init__(self, size: int, params: LearnerParams) -> None:
        self.params = params
        self.state = InternalDualState.zeros(size)
        self._strategy = uniform_strategy(size)

    @property
    def strategy(self) -> MixedStrategy:
        return self._strategy

    def update(self, utility: float, played: int, epoch: int, epochs: int) -> MixedStrategy:
        gamma_now = self.params.gamma_at(epoch, epochs)
        estimate = iw_estimate(utility, played, self._strategy, gamma_now)
        gamma_next = self.params.gamma_at(epoch + 1, epochs)
        self._strategy, self.state = internal_update(
            self.state,
            estimate,
            self._strategy,
            self.params.eta,
            gamma_next,
            positive_part=self.params.positive_part,
        )
        return self._strategy


def build_learner(
    algorithm: str,
    radar_index: int,
    action_space: ActionSpace,
    params: Optional[LearnerParams] = None,
):
    """Learner for 1-based ``radar_index`` running ``algorithm``."""

    size = len(action_space)
    if algorithm == "random":
        return FixedStrategyLearner(uniform_strategy(size))
    if algorithm == "nash":
        action = nash_assignment(radar_index, action_space)
        return FixedStrategyLearner(MixedStrategy.point_mass(size, action_space.index_of(action)))
    if algorithm not in ALGORITHMS:
        raise ScenarioError(f"unknown algorithm '{algorithm}'")
    resolved = LearnerParamsValidator.normalize(params, base=LearnerParams.for_algorithm(algorithm))
    if algorithm == "external":
        return ExternalRegretLearner(size, resolved)
    return InternalRegretLearner(size, resolved)


# ---------------------------------------------------------------------------
# schedules and bounds


@dataclass(frozen=True)
class TheoreticalSchedule:
    eta: float
    gamma: float
    regime: str

    def to_params(self, *, gamma_max: float = 0.5, positive_part: bool = False) -> LearnerParams:
        gamma = min(self.gamma, gamma_max)
        return LearnerParams(
            eta=self.eta,
            gamma=gamma,
            gamma_end=gamma,
            gamma_schedule="constant",
            gamma_max=gamma_max,
            positive_part=positive_part,
        )


def theoretical_schedule(size: int, horizon: int, regime: str, *, kappa: float = 1.0) -> TheoreticalSchedule:
    """Step size and exploration that balance the external-regret bound terms."""

    if size < 2:
        raise ScenarioError("theoretical schedule needs at least two strategies")
    if horizon < 1:
        raise ScenarioError("horizon must be >= 1")
    log_n = math.log(size)
    if regime == "explored":
        gamma = (size * log_n) ** (1.0 / 3.0) / horizon ** (1.0 / 3.0)
        eta = kappa * log_n ** (2.0 / 3.0) / (size ** (1.0 / 3.0) * horizon ** (2.0 / 3.0))
        return TheoreticalSchedule(eta=eta, gamma=gamma, regime=regime)
    if regime == "unexplored":
        return TheoreticalSchedule(eta=kappa * math.sqrt(log_n / (size * horizon)), gamma=0.0, regime=regime)
    raise ScenarioError("regime must be 'explored' or 'unexplored'")


def regret_bound_external(size: int, horizon: int, eta: float, gamma: float, *, gamma_max: float = 0.5) -> float:
    if eta <= 0:
        raise ScenarioError("eta must be > 0")
    log_n = math.log(size)
    effective = min(gamma_max, gamma)
    if effective <= 0:
        return log_n / eta + eta * horizon * size
    return log_n / eta + eta * horizon * size / effective + effective * horizon


def regret_bound_internal(size: int, horizon: int, eta: float, gamma: float, *, gamma_max: float = 0.5) -> float:
    return size * regret_bound_external(size, horizon, eta, gamma, gamma_max=gamma_max)


def equilibrium_rate(size: int, horizon: int, kind: str) -> float:
    """Decay rate of ε for the empirical play: CCE from external, CE from internal regret."""

    log_n = math.log(size)
    if kind == "CCE":
        return (size * log_n) ** (1.0 / 3.0) * horizon ** (-1.0 / 3.0)
    if kind == "CE":
        return size ** (4.0 / 3.0) * log_n ** (1.0 / 3.0) * horizon ** (-1.0 / 3.0)
    raise ScenarioError("kind must be 'CCE' or 'CE'")


__all__ = [
    "ALGORITHMS",
    "StationaryDistributionError",
    "ExternalDualState",
    "InternalDualState",
    "iw_estimate",
    "external_update",
    "internal_update",
    "stationary_distribution",
    "FixedStrategyLearner",
    "ExternalRegretLearner",
    "InternalRegretLearner",
    "build_learner",
    "TheoreticalSchedule",
    "theoretical_schedule",
    "regret_bound_external",
    "regret_bound_internal",
    "equilibrium_rate",
]
