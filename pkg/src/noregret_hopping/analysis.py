"""Offline regret oracles, equilibrium certificates and collision metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .config import scenario_from_mapping, scenario_to_mapping
from .feedback import UtilityMap, cpi_utility
from .model import ActionSpace, Scenario, ScenarioError
from .scheduler import ChirpSchedule, action_schedule, schedule_from_cells
from .waveform import fast_power_sim, interference_mask

Profile = Tuple[int, ...]


LoggedCells = List[List[Optional[np.ndarray]]]


@dataclass(eq=False)
class PlayHistory:
    """Joint play of every radar over a run.

    ``profiles[τ, i]`` is the 0-based flat action radar ``i`` played in epoch ``τ``.
    A radar that committed to its action has its schedule rebuilt from it; a radar
    that drew a fresh start every block has the flat cells of its chirps logged in
    ``cells[τ][i]`` and is replayed from those.
    """

    scenario: Scenario
    profiles: np.ndarray
    utilities: np.ndarray
    block_length: int = 1
    algorithm: str = ""
    fidelity: str = "fast"
    beta: float = 2.0
    cells: Optional[LoggedCells] = None
    _schedule_cache: Dict[Tuple[int, int], ChirpSchedule] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.profiles = np.asarray(self.profiles, dtype=int).reshape(-1, self.scenario.num_radars)
        self.utilities = np.asarray(self.utilities, dtype=float).reshape(self.profiles.shape)
        if self.profiles.shape[0] < 1:
            raise ScenarioError("history needs at least one epoch")
        if np.any(self.profiles < 0) or np.any(self.profiles >= len(self.scenario.action_space)):
            raise ScenarioError("history profiles reference actions outside the action space")
        if np.any(self.utilities <= 0) or np.any(self.utilities >= 1):
            raise ScenarioError("logged utilities must lie in (0, 1)")
        if self.cells is not None:
            self.cells = self._normalise_cells(self.cells)

    def _normalise_cells(self, cells: Sequence[Sequence[Any]]) -> LoggedCells:
        if len(cells) != self.epochs:
            raise ScenarioError("logged cells need one row per epoch")
        size = len(self.scenario.action_space)
        rows: LoggedCells = []
        for epoch, row in enumerate(cells):
            if len(row) != self.num_radars:
                raise ScenarioError(f"epoch {epoch}: logged cells need one entry per radar")
            entries: List[Optional[np.ndarray]] = []
            for radar, entry in enumerate(row):
                if entry is None:
                    entries.append(None)
                    continue
                flat = np.asarray(entry, dtype=int)
                if flat.shape != (self.scenario.radars[radar].chirps,):
                    raise ScenarioError(f"epoch {epoch}: radar {radar} logged a schedule of the wrong length")
                if np.any((flat < 0) | (flat >= size)):
                    raise ScenarioError(f"epoch {epoch}: radar {radar} logged a cell outside the action space")
                entries.append(flat)
            rows.append(entries)
        return rows

    @property
    def epochs(self) -> int:
        return int(self.profiles.shape[0])

    @property
    def num_radars(self) -> int:
        return int(self.profiles.shape[1])

    def action_schedule(self, radar: int, action: int) -> ChirpSchedule:
        """Schedule of ``radar`` committed to ``action`` for a whole CPI."""

        key = (radar, int(action))
        cached = self._schedule_cache.get(key)
        if cached is None:
            cached = action_schedule(
                int(action),
                self.block_length,
                self.scenario.radars[radar].chirps,
                self.scenario.action_space,
            )
            self._schedule_cache[key] = cached
        return cached

    def is_logged(self, epoch: int, radar: int) -> bool:
        return self.cells is not None and self.cells[epoch][radar] is not None

    def schedule(self, epoch: int, radar: int) -> ChirpSchedule:
        if self.is_logged(epoch, radar):
            assert self.cells is not None
            return schedule_from_cells(self.cells[epoch][radar], self.scenario.action_space)
        return self.action_schedule(radar, int(self.profiles[epoch, radar]))

    def schedules(self, epoch: int) -> List[ChirpSchedule]:
        """Schedules of every radar in 0-based ``epoch``."""

        if not 0 <= epoch < self.epochs:
            raise ScenarioError(f"epoch {epoch} is not logged")
        return [self.schedule(epoch, i) for i in range(self.num_radars)]

    def opponent_key(self, epoch: int, radar: int) -> Optional[Profile]:
        """Actions of the other radars when all of them committed, else ``None``."""

        others = [i for i in range(self.num_radars) if i != radar]
        if any(self.is_logged(epoch, i) for i in others):
            return None
        return tuple(int(self.profiles[epoch, i]) for i in others)

    def utility_map(self, radar: int) -> UtilityMap:
        return UtilityMap.for_scenario(self.scenario, radar, beta=self.beta)

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "scenario": scenario_to_mapping(self.scenario),
            "profiles": self.profiles.tolist(),
            "utilities": self.utilities.tolist(),
            "block_length": self.block_length,
            "algorithm": self.algorithm,
            "fidelity": self.fidelity,
            "beta": self.beta,
        }
        if self.cells is not None:
            payload["cells"] = [[None if entry is None else entry.tolist() for entry in row] for row in self.cells]
        return payload

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "PlayHistory":
        missing = [key for key in ("scenario", "profiles", "utilities") if key not in payload]
        if missing:
            raise ScenarioError(f"history is missing {', '.join(missing)}")
        return cls(
            scenario=scenario_from_mapping(payload["scenario"]),
            profiles=np.asarray(payload["profiles"], dtype=int),
            utilities=np.asarray(payload["utilities"], dtype=float),
            block_length=int(payload.get("block_length", 1)),
            algorithm=str(payload.get("algorithm", "")),
            fidelity=str(payload.get("fidelity", "fast")),
            beta=float(payload.get("beta", 2.0)),
            cells=payload.get("cells"),
        )


def save_history(history: PlayHistory, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(history.to_dict(), indent=2), encoding="utf-8")
    return path


def load_history(path: Path) -> PlayHistory:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return PlayHistory.from_dict(payload)


# ---------------------------------------------------------------------------
# empirical play


def empirical_distribution(history: PlayHistory) -> Dict[Profile, Fraction]:
    counts: Dict[Profile, int] = {}
    for row in history.profiles:
        profile = tuple(int(value) for value in row)
        counts[profile] = counts.get(profile, 0) + 1
    return {profile: Fraction(count, history.epochs) for profile, count in counts.items()}


# ---------------------------------------------------------------------------
# counterfactual oracles


def counterfactual_utility(history: PlayHistory, epoch: int, radar: int, alternative: int) -> float:
    """Utility of ``radar`` in ``epoch`` had it committed to ``alternative`` against the logged opponents."""

    schedules = history.schedules(epoch)
    schedules[radar] = history.action_schedule(radar, alternative)
    powers = fast_power_sim(history.scenario, schedules, victims=[radar])[radar]
    return cpi_utility(powers.sinr, history.utility_map(radar))


def counterfactual_matrix(history: PlayHistory, radar: int) -> np.ndarray:
    """Epochs x actions matrix of replayed utilities of ``radar``.

    Rows repeat whenever the opponents committed to the same actions, so they are
    computed once per opponent profile.
    """

    size = len(history.scenario.action_space)
    matrix = np.zeros((history.epochs, size))
    rows: Dict[Profile, np.ndarray] = {}
    for epoch in range(history.epochs):
        key = history.opponent_key(epoch, radar)
        row = rows.get(key) if key is not None else None
        if row is None:
            row = np.array([counterfactual_utility(history, epoch, radar, action) for action in range(size)])
            if key is not None:
                rows[key] = row
        matrix[epoch] = row
    return matrix


def realised_utilities(history: PlayHistory, radar: int, matrix: Optional[np.ndarray] = None) -> np.ndarray:
    """Replayed utility of what ``radar`` actually transmitted in every epoch."""

    if matrix is None:
        matrix = counterfactual_matrix(history, radar)
    played = history.profiles[:, radar]
    realised = np.asarray(matrix, dtype=float)[np.arange(history.epochs), played].copy()
    for epoch in range(history.epochs):
        if history.is_logged(epoch, radar):
            powers = fast_power_sim(history.scenario, history.schedules(epoch), victims=[radar])[radar]
            realised[epoch] = cpi_utility(powers.sinr, history.utility_map(radar))
    return realised


def _realised_or_played(matrix: np.ndarray, played: np.ndarray, realised: Optional[Sequence[float]]) -> np.ndarray:
    if realised is None:
        return matrix[np.arange(matrix.shape[0]), played]
    realised = np.asarray(realised, dtype=float)
    if realised.shape != (matrix.shape[0],):
        raise ScenarioError("one realised utility per epoch is required")
    return realised


def external_regret_series(
    matrix: np.ndarray,
    played: Sequence[int],
    realised: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Prefix regrets against the best fixed action in hindsight.

    ``realised`` defaults to the matrix entry of the played action.
    """

    matrix = np.asarray(matrix, dtype=float)
    played = np.asarray(played, dtype=int)
    earned = np.cumsum(_realised_or_played(matrix, played, realised))
    best_fixed = np.max(np.cumsum(matrix, axis=0), axis=1)
    return best_fixed - earned


def swap_regret_series(
    matrix: np.ndarray,
    played: Sequence[int],
    realised: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Prefix regrets against the best swap map; the maximum splits per source action."""

    matrix = np.asarray(matrix, dtype=float)
    played = np.asarray(played, dtype=int)
    earned = _realised_or_played(matrix, played, realised)
    size = matrix.shape[1]
    gains = np.zeros((size, size))
    series = np.zeros(matrix.shape[0])
    for epoch, source in enumerate(played):
        gains[source] += matrix[epoch] - earned[epoch]
        series[epoch] = float(np.max(gains, axis=1).sum())
    return series


def external_regret(history: PlayHistory, radar: int, matrix: Optional[np.ndarray] = None) -> np.ndarray:
    if matrix is None:
        matrix = counterfactual_matrix(history, radar)
    realised = realised_utilities(history, radar, matrix)
    return external_regret_series(matrix, history.profiles[:, radar], realised)


def swap_regret(history: PlayHistory, radar: int, matrix: Optional[np.ndarray] = None) -> np.ndarray:
    if matrix is None:
        matrix = counterfactual_matrix(history, radar)
    realised = realised_utilities(history, radar, matrix)
    return swap_regret_series(matrix, history.profiles[:, radar], realised)


@dataclass(frozen=True)
class EquilibriumCertificate:
    """Empirical play is an ε_ext-CCE and an ε_int-CE."""

    external: Dict[str, float]
    internal: Dict[str, float]
    horizon: int
    kind: str = "CCE"
    external_series: Dict[str, List[float]] = field(default_factory=dict)
    internal_series: Dict[str, List[float]] = field(default_factory=dict)

    @property
    def epsilon_external(self) -> float:
        return max(self.external.values()) if self.external else 0.0

    @property
    def epsilon_internal(self) -> float:
        return max(self.internal.values()) if self.internal else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "horizon": self.horizon,
            "epsilon_external": self.epsilon_external,
            "epsilon_internal": self.epsilon_internal,
            "external": dict(self.external),
            "internal": dict(self.internal),
            "external_series": {key: list(value) for key, value in self.external_series.items()},
            "internal_series": {key: list(value) for key, value in self.internal_series.items()},
        }


def certify(history: PlayHistory, *, tolerance: float = 0.0) -> EquilibriumCertificate:
    """Average regrets of every radar; ``kind`` is CE when ε_int is within ``tolerance``."""

    external: Dict[str, float] = {}
    internal: Dict[str, float] = {}
    external_series: Dict[str, List[float]] = {}
    internal_series: Dict[str, List[float]] = {}
    horizon = history.epochs
    for index, radar in enumerate(history.scenario.radars):
        matrix = counterfactual_matrix(history, index)
        played = history.profiles[:, index]
        realised = realised_utilities(history, index, matrix)
        ext = external_regret_series(matrix, played, realised)
        swap = swap_regret_series(matrix, played, realised)
        external[radar.id] = max(float(ext[-1]) / horizon, 0.0)
        internal[radar.id] = float(swap[-1]) / horizon
        external_series[radar.id] = ext.tolist()
        internal_series[radar.id] = swap.tolist()
    epsilon_internal = max(internal.values())
    return EquilibriumCertificate(
        external=external,
        internal=internal,
        horizon=horizon,
        kind="CE" if epsilon_internal <= tolerance else "CCE",
        external_series=external_series,
        internal_series=internal_series,
    )


# ---------------------------------------------------------------------------
# collisions


def collision_rate(
    schedules: Sequence[ChirpSchedule],
    action_space: ActionSpace,
    *,
    mode: str = "cell",
    scenario: Optional[Scenario] = None,
) -> float:
    """Collision share of one CPI.

    ``cell`` counts a chirp transmission when another radar picked the same (a, b) cell
    in the same chirp; ``overlap`` counts it when any neighbour overlaps it in band and
    time. ``chirp`` is normalised per chirp slot instead: the share of chirp indices in
    which two or more radars sit on one cell.
    """

    if not schedules:
        return 0.0
    if mode == "overlap":
        if scenario is None:
            raise ScenarioError("overlap collision mode needs the scenario")
        hits = sum(int(interference_mask(scenario, schedules, index).sum()) for index in range(len(schedules)))
        return hits / sum(len(schedule) for schedule in schedules)
    if mode not in ("cell", "chirp"):
        raise ScenarioError("collision mode must be 'cell', 'chirp' or 'overlap'")

    lengths = {len(schedule) for schedule in schedules}
    if len(lengths) != 1:
        raise ScenarioError("cell collisions need schedules on one chirp grid")
    cells = np.stack([schedule.flat_indices(action_space) for schedule in schedules])
    collided = np.zeros(cells.shape, dtype=bool)
    for index in range(cells.shape[0]):
        others = np.delete(cells, index, axis=0)
        if others.size:
            collided[index] = np.any(others == cells[index], axis=0)
    if mode == "chirp":
        return float(collided.any(axis=0).mean())
    return float(collided.mean())


__all__ = [
    "PlayHistory",
    "save_history",
    "load_history",
    "empirical_distribution",
    "counterfactual_utility",
    "counterfactual_matrix",
    "realised_utilities",
    "external_regret_series",
    "swap_regret_series",
    "external_regret",
    "swap_regret",
    "EquilibriumCertificate",
    "certify",
    "collision_rate",
]
