"""Per-action SINR/SNR estimation and the bounded CPI utility."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple, Union

import numpy as np

from .model import RadarParams, Scenario, ScenarioError, Target, dbm_to_watts, linear_to_db
from .scheduler import ChirpSchedule
from .waveform import AdcMatrix, ChirpPowers, link_budget_snr

Pair = Tuple[int, int]

UTILITY_FLOOR = 1e-12


@dataclass(frozen=True)
class UtilityMap:
    """Saturating map g(s) = s^β / (s^β + S0^β) on linear SINR."""

    beta: float = 2.0
    s0: float = 1.0

    def __post_init__(self) -> None:
        if self.beta <= 0 or self.s0 <= 0:
            raise ScenarioError("utility map needs beta > 0 and S0 > 0")

    def __call__(self, sinr: float) -> float:
        return saturating_utility(sinr, self)

    @classmethod
    def for_radar(
        cls,
        radar: RadarParams,
        noise_power_dbm: float,
        nominal_range_m: float,
        rcs_dbsm: float,
        *,
        beta: float = 2.0,
    ) -> "UtilityMap":
        """Half-good point at the clean SNR of a nominal target."""

        reference = Target(range=nominal_range_m, velocity=0.0, rcs_dbsm=rcs_dbsm)
        return cls(beta=beta, s0=link_budget_snr(radar, reference, dbm_to_watts(noise_power_dbm)))

    @classmethod
    def for_scenario(cls, scenario: Scenario, radar_index: int, *, beta: float = 2.0) -> "UtilityMap":
        return cls.for_radar(
            scenario.radars[radar_index],
            scenario.noise_power_dbm,
            scenario.nominal_range,
            scenario.nominal_rcs_dbsm,
            beta=beta,
        )


def saturating_utility(sinr: float, utility_map: UtilityMap) -> float:
    if sinr < 0:
        raise ScenarioError("SINR must be non-negative")
    # ratio form stays finite for very large SINR
    ratio = (utility_map.s0 / sinr) ** utility_map.beta if sinr > 0 else math.inf
    return 1.0 / (1.0 + ratio)


@dataclass(frozen=True)
class CpiFeedback:
    """Per-action SINR/SNR tables (linear) and the scalar utility of one CPI."""

    sinr: Dict[Pair, float]
    snr: Dict[Pair, float]
    utility: float
    mean_sinr: float
    epoch: int = 0
    chirp_sinr: np.ndarray = field(default_factory=lambda: np.zeros(0), compare=False, repr=False)

    @property
    def mean_sinr_db(self) -> float:
        return linear_to_db(self.mean_sinr)


def _as_powers(components: Union[AdcMatrix, ChirpPowers]) -> ChirpPowers:
    if isinstance(components, AdcMatrix):
        return components.chirp_powers()
    return components


def _check_alignment(powers: ChirpPowers, schedule: ChirpSchedule) -> None:
    if len(powers) != len(schedule):
        raise ScenarioError("powers and schedule cover a different number of chirps")


def _average_by_pair(values: np.ndarray, schedule: ChirpSchedule, mask: np.ndarray) -> Dict[Pair, float]:
    table: Dict[Pair, float] = {}
    sums: Dict[Pair, float] = {}
    counts: Dict[Pair, int] = {}
    for k in np.flatnonzero(mask):
        pair = (int(schedule.subbands[k]) + 1, int(schedule.slots[k]) + 1)
        sums[pair] = sums.get(pair, 0.0) + float(values[k])
        counts[pair] = counts.get(pair, 0) + 1
    for pair, total in sums.items():
        table[pair] = total / counts[pair]
    return table


def estimate_per_action_sinr(
    components: Union[AdcMatrix, ChirpPowers],
    schedule: ChirpSchedule,
) -> Dict[Pair, float]:
    """Mean of P(clean)/(P(interference)+P(noise)) over the chirps using each (a, b)."""

    powers = _as_powers(components)
    _check_alignment(powers, schedule)
    return _average_by_pair(powers.sinr, schedule, np.ones(len(powers), dtype=bool))


def estimate_per_action_snr(
    components: Union[AdcMatrix, ChirpPowers],
    schedule: ChirpSchedule,
) -> Dict[Pair, float]:
    """Mean of P(total)/P(noise) over the interference-free chirps of each (a, b)."""

    powers = _as_powers(components)
    _check_alignment(powers, schedule)
    return _average_by_pair(powers.total / powers.noise, schedule, powers.interference_free)


def clip_utility(value: float) -> float:
    return min(max(value, UTILITY_FLOOR), 1.0 - UTILITY_FLOOR)


def cpi_utility(chirp_sinr: np.ndarray, utility_map: UtilityMap) -> float:
    """u(mean per-chirp SINR), clipped into the open unit interval."""

    values = np.asarray(chirp_sinr, dtype=float)
    if values.size == 0:
        raise ScenarioError("cannot form a utility for an empty CPI")
    return clip_utility(saturating_utility(float(values.mean()), utility_map))


def cpi_feedback(
    components: Union[AdcMatrix, ChirpPowers],
    schedule: ChirpSchedule,
    utility_map: UtilityMap,
    *,
    epoch: int = 0,
) -> CpiFeedback:
    powers = _as_powers(components)
    _check_alignment(powers, schedule)
    chirp_sinr = powers.sinr
    return CpiFeedback(
        sinr=estimate_per_action_sinr(powers, schedule),
        snr=estimate_per_action_snr(powers, schedule),
        utility=cpi_utility(chirp_sinr, utility_map),
        mean_sinr=float(chirp_sinr.mean()),
        epoch=epoch,
        chirp_sinr=chirp_sinr,
    )


__all__ = [
    "UtilityMap",
    "CpiFeedback",
    "UTILITY_FLOOR",
    "saturating_utility",
    "estimate_per_action_sinr",
    "estimate_per_action_snr",
    "clip_utility",
    "cpi_utility",
    "cpi_feedback",
]
