"""Dechirped baseband synthesis and the closed-form power simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .model import SPEED_OF_LIGHT, RadarParams, Scenario, ScenarioError, Target
from .scheduler import ChirpEntry, ChirpSchedule

_FOUR_PI = 4.0 * math.pi


# ---------------------------------------------------------------------------
# link budget


def target_power(radar: RadarParams, target: Target) -> float:
    """Echo power in watts from the monostatic radar equation."""

    return (
        radar.p_t_watts
        * radar.gain**2
        * radar.wavelength**2
        * target.rcs
        / (_FOUR_PI**3 * target.range**4)
    )


def interference_power(victim: RadarParams, aggressor: RadarParams) -> float:
    """One-way direct-path power in watts from ``aggressor`` into ``victim``."""

    distance = victim.distance_to(aggressor)
    if distance <= 0:
        raise ScenarioError(f"radars '{victim.id}' and '{aggressor.id}' are co-located")
    return (
        aggressor.p_t_watts
        * aggressor.gain
        * victim.gain
        * aggressor.wavelength**2
        / (_FOUR_PI**2 * distance**2)
    )


def link_budget_snr(radar: RadarParams, target: Target, noise_power: float) -> float:
    """Interference-free SNR (linear) of ``target``; ``noise_power`` in watts."""

    return target_power(radar, target) / noise_power


# ---------------------------------------------------------------------------
# overlap geometry


@dataclass(frozen=True)
class Overlap:
    """Time intersection of two chirps in the victim's PRI frame (seconds)."""

    overlaps: bool
    start: float = 0.0
    end: float = 0.0

    @property
    def duration(self) -> float:
        return max(self.end - self.start, 0.0)

    def __bool__(self) -> bool:
        return self.overlaps


def overlap_detect(
    victim_entry: ChirpEntry,
    aggressor_entry: ChirpEntry,
    delay: float,
    victim: RadarParams,
    aggressor: RadarParams,
) -> Overlap:
    """Band and active-window intersection of two chirps transmitted in the same PRI."""

    f_lo = max(victim_entry.f, aggressor_entry.f)
    f_hi = min(victim_entry.f + victim.bandwidth, aggressor_entry.f + aggressor.bandwidth)
    t_lo = max(victim_entry.t, aggressor_entry.t + delay)
    t_hi = min(victim_entry.t + victim.t_active, aggressor_entry.t + delay + aggressor.t_active)
    if f_hi > f_lo and t_hi > t_lo:
        return Overlap(True, t_lo, t_hi)
    return Overlap(False)


@dataclass(frozen=True)
class ChirpOverlaps:
    """Overlapping (victim chirp, aggressor chirp) pairs of one directed edge.

    ``start``/``end`` are measured from the victim chirp's own start.
    """

    victim_chirps: np.ndarray
    aggressor_chirps: np.ndarray
    start: np.ndarray
    end: np.ndarray

    @property
    def durations(self) -> np.ndarray:
        return self.end - self.start


def chirp_overlaps(
    victim: RadarParams,
    victim_schedule: ChirpSchedule,
    aggressor: RadarParams,
    aggressor_schedule: ChirpSchedule,
    delay: float,
) -> ChirpOverlaps:
    """All chirp pairs whose bands and absolute active windows intersect over one CPI."""

    k = np.arange(len(victim_schedule))
    v_start = k * victim.t_pri + victim_schedule.offsets
    v_end = v_start + victim.t_active
    v_f = victim_schedule.frequencies
    base = np.floor((v_start - delay) / aggressor.t_pri).astype(int)
    count = len(aggressor_schedule)

    hits_k: List[np.ndarray] = []
    hits_kk: List[np.ndarray] = []
    hits_lo: List[np.ndarray] = []
    hits_hi: List[np.ndarray] = []
    # an aggressor chirp starting before the PRI of ``base`` ends before the victim starts
    for shift in range(int(math.ceil(victim.t_active / aggressor.t_pri)) + 1):
        kk = base + shift
        valid = (kk >= 0) & (kk < count)
        kk_safe = np.clip(kk, 0, count - 1)
        a_start = kk * aggressor.t_pri + aggressor_schedule.offsets[kk_safe] + delay
        a_end = a_start + aggressor.t_active
        a_f = aggressor_schedule.frequencies[kk_safe]
        lo = np.maximum(v_start, a_start)
        hi = np.minimum(v_end, a_end)
        f_lo = np.maximum(v_f, a_f)
        f_hi = np.minimum(v_f + victim.bandwidth, a_f + aggressor.bandwidth)
        hit = valid & (hi > lo) & (f_hi > f_lo)
        if np.any(hit):
            hits_k.append(k[hit])
            hits_kk.append(kk[hit])
            hits_lo.append((lo - v_start)[hit])
            hits_hi.append((hi - v_start)[hit])

    if not hits_k:
        empty = np.zeros(0)
        return ChirpOverlaps(np.zeros(0, dtype=int), np.zeros(0, dtype=int), empty, empty)
    return ChirpOverlaps(
        victim_chirps=np.concatenate(hits_k),
        aggressor_chirps=np.concatenate(hits_kk),
        start=np.concatenate(hits_lo),
        end=np.concatenate(hits_hi),
    )


def interference_mask(scenario: Scenario, schedules: Sequence[ChirpSchedule], radar_index: int) -> np.ndarray:
    """Chirps of radar ``radar_index`` overlapped by at least one neighbour."""

    victim = scenario.radars[radar_index]
    mask = np.zeros(len(schedules[radar_index]), dtype=bool)
    for edge in scenario.graph.aggressors(victim.id):
        source = scenario.radar_index(edge.source)
        overlaps = chirp_overlaps(
            victim, schedules[radar_index], scenario.radars[source], schedules[source], edge.delay
        )
        mask[overlaps.victim_chirps] = True
    return mask


# ---------------------------------------------------------------------------
# power-level simulation


@dataclass(frozen=True, eq=False)
class ChirpPowers:
    """Per-chirp average powers (watts) of the clean, interference and noise parts."""

    signal: np.ndarray
    interference: np.ndarray
    noise: np.ndarray
    total: np.ndarray

    def __len__(self) -> int:
        return int(self.signal.size)

    @property
    def interference_free(self) -> np.ndarray:
        return self.interference == 0

    @property
    def sinr(self) -> np.ndarray:
        return self.signal / (self.interference + self.noise)


def fast_power_sim(
    scenario: Scenario,
    schedules: Sequence[ChirpSchedule],
    *,
    victims: Optional[Sequence[int]] = None,
) -> Dict[int, ChirpPowers]:
    """Closed-form per-chirp powers for every radar (or only ``victims``)."""

    if len(schedules) != scenario.num_radars:
        raise ScenarioError("one schedule per radar is required")
    indices = range(scenario.num_radars) if victims is None else victims
    noise_level = scenario.noise_power
    result: Dict[int, ChirpPowers] = {}
    for index in indices:
        radar = scenario.radars[index]
        chirps = len(schedules[index])
        signal = np.full(chirps, sum(target_power(radar, target) for target in scenario.targets[index]))
        interference = np.zeros(chirps)
        for edge in scenario.graph.aggressors(radar.id):
            source = scenario.radar_index(edge.source)
            aggressor = scenario.radars[source]
            overlaps = chirp_overlaps(radar, schedules[index], aggressor, schedules[source], edge.delay)
            if overlaps.victim_chirps.size == 0:
                continue
            level = interference_power(radar, aggressor)
            np.add.at(interference, overlaps.victim_chirps, level * overlaps.durations / radar.t_active)
        noise = np.full(chirps, noise_level)
        result[index] = ChirpPowers(
            signal=signal,
            interference=interference,
            noise=noise,
            total=signal + interference + noise,
        )
    return result


# ---------------------------------------------------------------------------
# waveform synthesis


@dataclass(frozen=True)
class BeatComponent:
    """One beat term inside one chirp; ``gate`` is a half-open sample window."""

    amplitude: complex
    kind: str
    gate: Tuple[int, int]
    chirp: int = 0
    source: Optional[str] = None
    slope_offset: float = 0.0

    def samples(self, n_samples: int, adc_rate: float) -> np.ndarray:
        start, end = self.gate
        if not 0 <= start <= end <= n_samples:
            raise ScenarioError(f"gate {self.gate} outside [0, {n_samples})")
        out = np.zeros(n_samples, dtype=complex)
        t = np.arange(start, end) / adc_rate
        out[start:end] = self.amplitude * np.exp(1j * math.pi * self.slope_offset * t**2)
        return out


def _gate(start: float, end: float, adc_rate: float, n_samples: int) -> Tuple[int, int]:
    # samples n with start <= n / f_s < end
    lo = int(math.ceil(start * adc_rate - 1e-9))
    hi = int(math.ceil(end * adc_rate - 1e-9))
    lo = min(max(lo, 0), n_samples)
    hi = min(max(hi, lo), n_samples)
    return lo, hi


def _target_phase(radar: RadarParams, target: Target, schedule: ChirpSchedule) -> np.ndarray:
    n = np.arange(radar.num_samples)[:, None] / radar.adc_rate
    s = schedule.slow_time(radar.t_pri)[None, :]
    beat = radar.slope * 2.0 * target.range / SPEED_OF_LIGHT
    doppler = radar.f_c * 2.0 * target.velocity / SPEED_OF_LIGHT
    delay = 2.0 * (target.range + target.velocity * s) / SPEED_OF_LIGHT
    hop = schedule.frequency_offsets[None, :]
    return 2.0 * math.pi * (beat * n + doppler * s + hop * delay)


def target_beat_matrix(
    radar: RadarParams,
    target: Target,
    schedule: ChirpSchedule,
    *,
    amplitude: Optional[complex] = None,
) -> np.ndarray:
    """N_t x K clean beat samples of one target; amplitude defaults to the radar-equation level."""

    if target.range <= 0:
        raise ScenarioError("target range must be > 0")
    if amplitude is None:
        amplitude = math.sqrt(target_power(radar, target))
    return amplitude * np.exp(1j * _target_phase(radar, target, schedule))


def target_beat_signal(
    radar: RadarParams,
    target: Target,
    schedule: ChirpSchedule,
    chirp: int,
    *,
    amplitude: Optional[complex] = None,
) -> np.ndarray:
    """Fast-time samples of one target in 0-based ``chirp``."""

    return target_beat_matrix(radar, target, schedule, amplitude=amplitude)[:, chirp]


def interference_beat_signal(
    victim: RadarParams,
    aggressor: RadarParams,
    victim_entry: ChirpEntry,
    aggressor_entry: ChirpEntry,
    delay: float,
    *,
    amplitude: Optional[complex] = None,
) -> np.ndarray:
    """Gated interference beat of one aggressor chirp inside one victim chirp."""

    overlap = overlap_detect(victim_entry, aggressor_entry, delay, victim, aggressor)
    if not overlap:
        return np.zeros(victim.num_samples, dtype=complex)
    if amplitude is None:
        amplitude = math.sqrt(interference_power(victim, aggressor))
    component = BeatComponent(
        amplitude=amplitude,
        kind="interference",
        gate=_gate(
            overlap.start - victim_entry.t,
            overlap.end - victim_entry.t,
            victim.adc_rate,
            victim.num_samples,
        ),
        source=aggressor.id,
        slope_offset=victim.slope - aggressor.slope,
    )
    return component.samples(victim.num_samples, victim.adc_rate)


@dataclass(frozen=True, eq=False)
class AdcMatrix:
    """Fast-time x chirp ADC samples with the clean, interference and noise parts kept apart."""

    clean: np.ndarray
    noise: np.ndarray
    adc_rate: float
    interference: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.clean.shape)  # type: ignore[return-value]

    @property
    def n_samples(self) -> int:
        return int(self.clean.shape[0])

    @property
    def chirps(self) -> int:
        return int(self.clean.shape[1])

    @property
    def interference_total(self) -> np.ndarray:
        total = np.zeros_like(self.clean)
        for part in self.interference.values():
            total = total + part
        return total

    @property
    def data(self) -> np.ndarray:
        return self.clean + self.interference_total + self.noise

    def chirp_powers(self) -> ChirpPowers:
        def power(values: np.ndarray) -> np.ndarray:
            return np.mean(np.abs(values) ** 2, axis=0)

        return ChirpPowers(
            signal=power(self.clean),
            interference=power(self.interference_total),
            noise=power(self.noise),
            total=power(self.data),
        )


def _random_phase(rng: np.random.Generator) -> complex:
    return complex(np.exp(1j * rng.uniform(0.0, 2.0 * math.pi)))


def synthesize_cpi_adc(
    scenario: Scenario,
    schedules: Sequence[ChirpSchedule],
    rng: np.random.Generator,
    *,
    include_noise: bool = True,
) -> List[AdcMatrix]:
    """Component-tracked ADC matrices for every radar of one CPI."""

    if len(schedules) != scenario.num_radars:
        raise ScenarioError("one schedule per radar is required")
    matrices: List[AdcMatrix] = []
    for index, radar in enumerate(scenario.radars):
        schedule = schedules[index]
        n_samples = radar.num_samples
        clean = np.zeros((n_samples, len(schedule)), dtype=complex)
        for target in scenario.targets[index]:
            amplitude = math.sqrt(target_power(radar, target)) * _random_phase(rng)
            clean += target_beat_matrix(radar, target, schedule, amplitude=amplitude)

        interference: Dict[str, np.ndarray] = {}
        for edge in scenario.graph.aggressors(radar.id):
            source = scenario.radar_index(edge.source)
            aggressor = scenario.radars[source]
            phase = _random_phase(rng)
            part = np.zeros_like(clean)
            overlaps = chirp_overlaps(radar, schedule, aggressor, schedules[source], edge.delay)
            if overlaps.victim_chirps.size:
                amplitude = math.sqrt(interference_power(radar, aggressor)) * phase
                for k, lo, hi in zip(overlaps.victim_chirps, overlaps.start, overlaps.end):
                    component = BeatComponent(
                        amplitude=amplitude,
                        kind="interference",
                        gate=_gate(lo, hi, radar.adc_rate, n_samples),
                        chirp=int(k),
                        source=aggressor.id,
                        slope_offset=radar.slope - aggressor.slope,
                    )
                    part[:, k] += component.samples(n_samples, radar.adc_rate)
            interference[aggressor.id] = part

        if include_noise:
            scale = math.sqrt(scenario.noise_power / 2.0)
            noise = scale * (rng.standard_normal(clean.shape) + 1j * rng.standard_normal(clean.shape))
        else:
            noise = np.zeros_like(clean)
        matrices.append(AdcMatrix(clean=clean, noise=noise, adc_rate=radar.adc_rate, interference=interference))
    return matrices


# ---------------------------------------------------------------------------
# binary dump


def write_adc_matrix(data: np.ndarray, adc_rate: float, path: Path) -> Path:
    """Text header line then little-endian interleaved float64 (re, im), row-major."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.ascontiguousarray(np.asarray(data, dtype=complex))
    if values.ndim != 2:
        raise ScenarioError("ADC data must be a 2-D matrix")
    header = f"ADC {values.shape[0]} {values.shape[1]} {adc_rate!r}\n".encode("ascii")
    with path.open("wb") as handle:
        handle.write(header)
        handle.write(values.astype("<c16").tobytes(order="C"))
    return path


def read_adc_matrix(path: Path) -> Tuple[np.ndarray, float]:
    raw = Path(path).read_bytes()
    newline = raw.index(b"\n")
    tag, rows, cols, rate = raw[:newline].decode("ascii").split()
    if tag != "ADC":
        raise ScenarioError(f"{path}: not an ADC dump")
    values = np.frombuffer(raw[newline + 1 :], dtype="<c16").reshape(int(rows), int(cols))
    return values.astype(complex), float(rate)


__all__ = [
    "target_power",
    "interference_power",
    "link_budget_snr",
    "Overlap",
    "overlap_detect",
    "ChirpOverlaps",
    "chirp_overlaps",
    "interference_mask",
    "ChirpPowers",
    "fast_power_sim",
    "BeatComponent",
    "target_beat_matrix",
    "target_beat_signal",
    "interference_beat_signal",
    "AdcMatrix",
    "synthesize_cpi_adc",
    "write_adc_matrix",
    "read_adc_matrix",
]
