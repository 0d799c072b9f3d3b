"""Domain types for the joint subband / time-slot scheduling game."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

_SIMPLEX_TOLERANCE = 1e-9


class ScenarioError(ValueError):
    """Raised when a domain object violates one of its invariants."""


def dbm_to_watts(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    if value <= 0:
        return float("-inf")
    return 10.0 * math.log10(value)


@dataclass(frozen=True)
class JointAction:
    """One cell of the action grid. ``a`` and ``b`` are 1-based."""

    a: int
    b: int
    f_a: float
    t_b: float

    def as_pair(self) -> Tuple[int, int]:
        return (self.a, self.b)


@dataclass(frozen=True)
class ActionSpace:
    """Cartesian grid of subband start frequencies and in-PRI start offsets.

    Flat indices are 0-based and row-major by (a, b): ``index = (a - 1) * A_t + (b - 1)``.
    """

    actions: Tuple[JointAction, ...]
    num_subbands: int
    num_slots: int
    f_c: float
    subband_spacing: float
    slot_spacing: float

    def __post_init__(self) -> None:
        if len(self.actions) != self.num_subbands * self.num_slots:
            raise ScenarioError("action list does not match the A_f x A_t grid")

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self) -> Iterator[JointAction]:
        return iter(self.actions)

    def __getitem__(self, index: int) -> JointAction:
        return self.actions[index]

    def flat_index(self, a: int, b: int) -> int:
        """Flat 0-based index of the 1-based pair (a, b)."""

        if not (1 <= a <= self.num_subbands and 1 <= b <= self.num_slots):
            raise ScenarioError(f"pair ({a}, {b}) is outside the action grid")
        return (a - 1) * self.num_slots + (b - 1)

    def index_of(self, action: JointAction) -> int:
        return self.flat_index(action.a, action.b)

    def pair(self, index: int) -> Tuple[int, int]:
        """0-based (subband, slot) pair of a flat index."""

        if not 0 <= index < len(self.actions):
            raise ScenarioError(f"flat index {index} is outside the action grid")
        return divmod(index, self.num_slots)

    @property
    def frequencies(self) -> np.ndarray:
        return self.f_c + self.subband_spacing * np.arange(self.num_subbands)

    @property
    def offsets(self) -> np.ndarray:
        return self.slot_spacing * np.arange(self.num_slots)

    @property
    def max_offset(self) -> float:
        return self.slot_spacing * (self.num_slots - 1)


@dataclass(frozen=True)
class RadarParams:
    """Per-radar FMCW parameters in SI units (Hz, s, m); powers stay in dBm/dBi."""

    id: str
    f_c: float
    bandwidth: float
    t_active: float
    t_pri: float
    chirps: int
    p_t_dbm: float
    position: Tuple[float, float] = (0.0, 0.0)
    antenna_gain_dbi: float = 20.0
    adc_rate: float = 10e6

    def __post_init__(self) -> None:
        errors: List[str] = []
        if self.t_active <= 0:
            errors.append("t_active must be > 0")
        if self.t_pri <= self.t_active:
            errors.append("t_pri must exceed t_active")
        if self.bandwidth <= 0:
            errors.append("bandwidth must be > 0")
        if self.chirps < 1:
            errors.append("chirps must be >= 1")
        if self.adc_rate <= 0:
            errors.append("adc_rate must be > 0")
        if self.f_c <= 0:
            errors.append("f_c must be > 0")
        if errors:
            raise ScenarioError(f"radar '{self.id}': " + "; ".join(errors))

    @property
    def slope(self) -> float:
        return self.bandwidth / self.t_active

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c

    @property
    def num_samples(self) -> int:
        # guard against 88.9999999 style rounding of T_a * f_s
        return int(math.floor(self.t_active * self.adc_rate + 1e-9))

    @property
    def p_t_watts(self) -> float:
        return dbm_to_watts(self.p_t_dbm)

    @property
    def gain(self) -> float:
        return db_to_linear(self.antenna_gain_dbi)

    @property
    def range_resolution(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.bandwidth)

    def distance_to(self, other: "RadarParams") -> float:
        return float(np.hypot(self.position[0] - other.position[0], self.position[1] - other.position[1]))


@dataclass(frozen=True)
class Target:
    """Point target seen by one radar; negative velocity means approaching."""

    range: float
    velocity: float
    rcs_dbsm: float = 20.0

    def __post_init__(self) -> None:
        if self.range <= 0:
            raise ScenarioError("target range must be > 0")

    @property
    def rcs(self) -> float:
        return db_to_linear(self.rcs_dbsm)


@dataclass(frozen=True)
class InterferenceEdge:
    source: str
    target: str
    delay: float = 0.0


@dataclass(frozen=True)
class InterferenceGraph:
    """Directed interference graph; an edge o -> i means o's chirps reach i after ``delay``."""

    nodes: Tuple[str, ...]
    edges: Tuple[InterferenceEdge, ...] = ()

    def __post_init__(self) -> None:
        errors: List[str] = []
        known = set(self.nodes)
        seen = set()
        for edge in self.edges:
            if edge.source == edge.target:
                errors.append(f"self edge on '{edge.source}'")
            if edge.delay < 0:
                errors.append(f"edge {edge.source}->{edge.target} has negative delay")
            if edge.source not in known or edge.target not in known:
                errors.append(f"edge {edge.source}->{edge.target} references an undeclared radar")
            key = (edge.source, edge.target)
            if key in seen:
                errors.append(f"duplicate edge {edge.source}->{edge.target}")
            seen.add(key)
        if errors:
            raise ScenarioError("; ".join(errors))

    @classmethod
    def fully_connected(cls, nodes: Sequence[str], delay: float = 0.0) -> "InterferenceGraph":
        edges = tuple(
            InterferenceEdge(source=src, target=dst, delay=delay)
            for dst in nodes
            for src in nodes
            if src != dst
        )
        return cls(nodes=tuple(nodes), edges=edges)

    def aggressors(self, victim: str) -> List[InterferenceEdge]:
        """Edges arriving at ``victim``, in declaration order."""

        return [edge for edge in self.edges if edge.target == victim]


@dataclass(frozen=True, eq=False)
class MixedStrategy:
    """Probability vector over the strategy set."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ScenarioError("strategy must be a non-empty vector")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise ScenarioError("strategy entries must be finite and non-negative")
        if abs(probs.sum() - 1.0) > _SIMPLEX_TOLERANCE:
            raise ScenarioError(f"strategy sums to {probs.sum()!r}, expected 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return int(self.probs.size)

    def __getitem__(self, index: int) -> float:
        return float(self.probs[index])

    @classmethod
    def point_mass(cls, size: int, index: int) -> "MixedStrategy":
        probs = np.zeros(size)
        probs[index] = 1.0
        return cls(probs)

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.probs.size, p=self.probs))

    def support(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.probs)]


@dataclass(frozen=True)
class Scenario:
    """Validated radar scene shared by all learners for a run."""

    radars: Tuple[RadarParams, ...]
    targets: Tuple[Tuple[Target, ...], ...]
    graph: InterferenceGraph
    action_space: ActionSpace
    noise_power_dbm: float = -88.0
    epochs: int = 15
    seed: int = 0
    max_range: float = 200.0
    nominal_range: float = 25.0
    nominal_rcs_dbsm: float = 20.0
    _index: Dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        errors: List[str] = []
        ids = [radar.id for radar in self.radars]
        if not ids:
            errors.append("scenario needs at least one radar")
        if len(set(ids)) != len(ids):
            errors.append("radar ids must be unique")
        if len(self.targets) != len(self.radars):
            errors.append("one target list per radar is required")
        if set(self.graph.nodes) != set(ids):
            errors.append("graph nodes must match the declared radars")
        if self.epochs < 1:
            errors.append("epochs must be >= 1")
        for radar in self.radars:
            if self.action_space.max_offset + radar.t_active > radar.t_pri + 1e-15:
                errors.append(f"radar '{radar.id}': last slot offset plus t_active exceeds t_pri")
        for radar, targets in zip(self.radars, self.targets):
            for target in targets:
                if target.range > self.max_range:
                    errors.append(f"radar '{radar.id}': target at {target.range:.2f} m beyond R_u")
        if errors:
            raise ScenarioError("; ".join(errors))
        object.__setattr__(self, "_index", {radar_id: idx for idx, radar_id in enumerate(ids)})

    @property
    def num_radars(self) -> int:
        return len(self.radars)

    @property
    def noise_power(self) -> float:
        """Noise power in watts."""

        return dbm_to_watts(self.noise_power_dbm)

    def radar_index(self, radar_id: str) -> int:
        try:
            return self._index[radar_id]
        except KeyError as exc:
            raise ScenarioError(f"unknown radar '{radar_id}'") from exc


def build_action_space(
    num_subbands: int,
    subband_spacing: float,
    num_slots: int,
    slot_spacing: float,
    f_c: float,
    *,
    radar: Optional[RadarParams] = None,
) -> ActionSpace:
    """Build the A_f x A_t grid with f_a = f_c + (a-1)Δf and t_b = (b-1)Δt."""

    if num_subbands < 1 or num_slots < 1:
        raise ScenarioError("action grid needs A_f >= 1 and A_t >= 1")
    if subband_spacing <= 0 or slot_spacing <= 0:
        raise ScenarioError("grid spacings must be > 0")
    if radar is not None and (num_slots - 1) * slot_spacing + radar.t_active > radar.t_pri:
        raise ScenarioError(f"radar '{radar.id}': slot {num_slots} does not fit inside the PRI")
    actions = tuple(
        JointAction(
            a=a + 1,
            b=b + 1,
            f_a=f_c + a * subband_spacing,
            t_b=b * slot_spacing,
        )
        for a in range(num_subbands)
        for b in range(num_slots)
    )
    return ActionSpace(
        actions=actions,
        num_subbands=num_subbands,
        num_slots=num_slots,
        f_c=f_c,
        subband_spacing=subband_spacing,
        slot_spacing=slot_spacing,
    )


def nash_assignment(radar_index: int, action_space: ActionSpace) -> JointAction:
    """Deterministic coordinated action of 1-based radar ``radar_index``."""

    if radar_index < 1:
        raise ScenarioError("radar index is 1-based")
    return action_space[(radar_index - 1) % len(action_space)]


def uniform_strategy(size: int) -> MixedStrategy:
    if size < 1:
        raise ScenarioError("uniform strategy needs at least one pure strategy")
    return MixedStrategy(np.full(size, 1.0 / size))


__all__ = [
    "SPEED_OF_LIGHT",
    "ScenarioError",
    "JointAction",
    "ActionSpace",
    "RadarParams",
    "Target",
    "InterferenceEdge",
    "InterferenceGraph",
    "MixedStrategy",
    "Scenario",
    "build_action_space",
    "nash_assignment",
    "uniform_strategy",
    "dbm_to_watts",
    "db_to_linear",
    "linear_to_db",
]
