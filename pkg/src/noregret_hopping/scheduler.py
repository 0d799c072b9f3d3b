"""Per-chirp schedules built by the stochastic round-robin sampler."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .model import ActionSpace, MixedStrategy, ScenarioError


@dataclass(frozen=True)
class ChirpEntry:
    """One chirp of a schedule; ``a`` and ``b`` are 1-based."""

    a: int
    b: int
    f: float
    t: float


@dataclass(frozen=True, eq=False)
class ChirpSchedule:
    """Subband/slot choice of each of the K chirps in a CPI.

    ``subbands`` and ``slots`` hold 0-based indices; ``frequencies`` and ``offsets`` the
    physical start frequency (Hz) and in-PRI start offset (s) of every chirp.
    """

    subbands: np.ndarray
    slots: np.ndarray
    frequencies: np.ndarray
    offsets: np.ndarray
    f_c: float

    def __post_init__(self) -> None:
        sizes = {len(self.subbands), len(self.slots), len(self.frequencies), len(self.offsets)}
        if len(sizes) != 1:
            raise ScenarioError("schedule arrays must share one length")
        for name in ("subbands", "slots", "frequencies", "offsets"):
            array = np.array(getattr(self, name))
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    def __len__(self) -> int:
        return int(self.subbands.size)

    def entry(self, k: int) -> ChirpEntry:
        return ChirpEntry(
            a=int(self.subbands[k]) + 1,
            b=int(self.slots[k]) + 1,
            f=float(self.frequencies[k]),
            t=float(self.offsets[k]),
        )

    def flat_indices(self, action_space: ActionSpace) -> np.ndarray:
        return self.subbands * action_space.num_slots + self.slots

    @property
    def frequency_offsets(self) -> np.ndarray:
        """Δf_k = f_k − f_c."""

        return self.frequencies - self.f_c

    @property
    def time_shifts(self) -> np.ndarray:
        """Δt_k = t_k − t_1."""

        return self.offsets - self.offsets[0]

    def slow_time(self, t_pri: float) -> np.ndarray:
        """Chirp start times (k−1)·T_pri + Δt_k."""

        return np.arange(len(self)) * t_pri + self.time_shifts

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "chirp": np.arange(1, len(self) + 1),
                "a": self.subbands + 1,
                "b": self.slots + 1,
                "f_hz": self.frequencies,
                "t_s": self.offsets,
            }
        )

    def same_as(self, other: "ChirpSchedule") -> bool:
        return (
            len(self) == len(other)
            and bool(np.array_equal(self.subbands, other.subbands))
            and bool(np.array_equal(self.slots, other.slots))
        )


def _schedule_from_indices(subbands: np.ndarray, slots: np.ndarray, action_space: ActionSpace) -> ChirpSchedule:
    return ChirpSchedule(
        subbands=subbands,
        slots=slots,
        frequencies=action_space.frequencies[subbands],
        offsets=action_space.offsets[slots],
        f_c=action_space.f_c,
    )


def _unroll_blocks(
    starts: Sequence[int],
    block_length: int,
    chirps: int,
    action_space: ActionSpace,
) -> ChirpSchedule:
    subbands: List[int] = []
    slots: List[int] = []
    for start in starts:
        s_f, s_t = action_space.pair(int(start))
        for step in range(block_length):
            if len(subbands) == chirps:
                break
            subbands.append((s_f + step) % action_space.num_subbands)
            slots.append((s_t + step) % action_space.num_slots)
    return _schedule_from_indices(np.array(subbands, dtype=int), np.array(slots, dtype=int), action_space)


def _check_lengths(block_length: int, chirps: int) -> None:
    if chirps < 1:
        raise ScenarioError("chirp count K must be >= 1")
    if block_length < 1:
        raise ScenarioError("block length must be >= 1")


@dataclass(frozen=True)
class AnchoredStart:
    """Block-start sampler of a pure strategy.

    Block ``b`` (0-based) starts where block ``b-1`` stopped, i.e. at the anchor
    advanced by ``b·ℓ`` on both indices, so the CPI walks one unbroken diagonal
    from the anchor cell whatever the block length.
    """

    action: int

    def starts(self, blocks: int, block_length: int, action_space: ActionSpace) -> np.ndarray:
        s_f, s_t = action_space.pair(self.action)
        steps = np.arange(blocks) * block_length
        subbands = (s_f + steps) % action_space.num_subbands
        slots = (s_t + steps) % action_space.num_slots
        return subbands * action_space.num_slots + slots


StartSampler = Union[MixedStrategy, AnchoredStart]


def stochastic_round_robin(
    sampler: StartSampler,
    block_length: int,
    chirps: int,
    action_space: ActionSpace,
    rng: Optional[np.random.Generator] = None,
) -> ChirpSchedule:
    """Pick one start pair per block and cycle both indices inside the block.

    A ``MixedStrategy`` draws the starts i.i.d. from its probabilities and needs
    ``rng``; an ``AnchoredStart`` lays them out deterministically.
    """

    _check_lengths(block_length, chirps)
    blocks = -(-chirps // block_length)
    if isinstance(sampler, AnchoredStart):
        if not 0 <= sampler.action < len(action_space):
            raise ScenarioError(f"action {sampler.action} is outside the action space")
        starts = sampler.starts(blocks, block_length, action_space)
    else:
        if len(sampler) != len(action_space):
            raise ScenarioError("strategy size does not match the action space")
        if rng is None:
            raise ScenarioError("a random generator is required to sample block starts")
        starts = rng.choice(len(action_space), size=blocks, p=sampler.probs)
    return _unroll_blocks(starts, block_length, chirps, action_space)


def action_schedule(action: int, block_length: int, chirps: int, action_space: ActionSpace) -> ChirpSchedule:
    """Schedule realised when a radar commits to ``action`` for the whole CPI.

    Chirp ``k`` sits on ``((a + k) mod A_f, (b + k) mod A_t)`` for every block length.
    """

    return stochastic_round_robin(AnchoredStart(int(action)), block_length, chirps, action_space)


def schedule_from_cells(cells: Sequence[int], action_space: ActionSpace) -> ChirpSchedule:
    """Rebuild a schedule from its flat cell indices, e.g. a logged one."""

    flat = np.asarray(cells, dtype=int)
    if flat.ndim != 1 or flat.size == 0:
        raise ScenarioError("a schedule needs at least one cell")
    if np.any((flat < 0) | (flat >= len(action_space))):
        raise ScenarioError("schedule cell outside the action space")
    subbands, slots = np.divmod(flat, action_space.num_slots)
    return _schedule_from_indices(subbands, slots, action_space)


def write_schedule_csv(schedule: ChirpSchedule, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    schedule.to_frame().to_csv(path, index=False)
    return path


__all__ = [
    "ChirpEntry",
    "ChirpSchedule",
    "AnchoredStart",
    "StartSampler",
    "stochastic_round_robin",
    "action_schedule",
    "schedule_from_cells",
    "write_schedule_csv",
]
