"""Range-Doppler processing for hopped and shifted chirp sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from .model import SPEED_OF_LIGHT, RadarParams, ScenarioError
from .scheduler import ChirpSchedule
from .waveform import AdcMatrix

FINE_RANGE_POINTS = 16


@dataclass(frozen=True, eq=False)
class RdGrids:
    """Coarse range r_m (m), Doppler velocities v_q (m/s) and fine offsets ε_p (m)."""

    ranges: np.ndarray
    velocities: np.ndarray
    doppler_bins: np.ndarray
    fine: np.ndarray


@dataclass(frozen=True, eq=False)
class RdCube:
    """Complex cube indexed [coarse range m, Doppler q, fine range p]."""

    values: np.ndarray
    grids: RdGrids

    @property
    def shape(self):
        return self.values.shape

    def magnitude_db(self) -> np.ndarray:
        power = np.abs(self.values) ** 2
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(power)

    def to_frame(self) -> pd.DataFrame:
        m, q, p = np.meshgrid(
            np.arange(self.values.shape[0]),
            np.arange(self.values.shape[1]),
            np.arange(self.values.shape[2]),
            indexing="ij",
        )
        return pd.DataFrame(
            {
                "m": m.ravel(),
                "q": self.grids.doppler_bins[q.ravel()],
                "p": p.ravel(),
                "range_m": (self.grids.ranges[m] + self.grids.fine[p]).ravel(),
                "velocity_mps": self.grids.velocities[q.ravel()],
                "magnitude_db": self.magnitude_db().ravel(),
            }
        )


@dataclass(frozen=True)
class Detection:
    m: int
    q: int
    p: int
    range: float
    velocity: float
    magnitude: float


def rd_grids(radar: RadarParams, *, fine_points: int = FINE_RANGE_POINTS) -> RdGrids:
    n_samples = radar.num_samples
    chirps = radar.chirps
    ranges = np.arange(n_samples) * SPEED_OF_LIGHT * radar.adc_rate / (2.0 * radar.slope * n_samples)
    doppler_bins = np.arange(chirps) - chirps // 2
    velocities = doppler_bins * SPEED_OF_LIGHT / (2.0 * radar.f_c * chirps * radar.t_pri)
    half = SPEED_OF_LIGHT / (4.0 * radar.bandwidth)
    fine = np.linspace(-half, half, fine_points)
    return RdGrids(ranges=ranges, velocities=velocities, doppler_bins=doppler_bins, fine=fine)


def coarse_range_transform(adc: Union[AdcMatrix, np.ndarray]) -> np.ndarray:
    """Unnormalised DFT along fast time: Y[m, k] = Σ_n y[n, k] exp(−j2π nm / N_t)."""

    data = adc.data if isinstance(adc, AdcMatrix) else np.asarray(adc)
    return np.fft.fft(data, axis=0)


def hop_time_compensate(
    coarse: np.ndarray,
    schedule: ChirpSchedule,
    ranges: np.ndarray,
    fine: np.ndarray,
    *,
    velocity: float = 0.0,
    t_pri: Optional[float] = None,
) -> np.ndarray:
    """Remove the hop phase Δf_k·2(r_m + ε_p + v s_k)/c; returns an (M, K, P) array."""

    hop = schedule.frequency_offsets
    hypothesis = ranges[:, None] + fine[None, :]
    phase = hop[None, :, None] * 2.0 * hypothesis[:, None, :] / SPEED_OF_LIGHT
    if velocity:
        if t_pri is None:
            raise ScenarioError("t_pri is required when a velocity hypothesis is compensated")
        slow = schedule.slow_time(t_pri)
        phase = phase + (hop * 2.0 * velocity * slow / SPEED_OF_LIGHT)[None, :, None]
    return coarse[:, :, None] * np.exp(-2j * math.pi * phase)


def slow_time_steering(
    schedule: ChirpSchedule,
    radar: RadarParams,
    velocities: np.ndarray,
    doppler_bins: np.ndarray,
    *,
    couple_velocity: bool = True,
) -> np.ndarray:
    """K x Q matrix D[k, q] = exp(−j2π s_k q / (K T_pri)), with the hop-velocity term folded in."""

    slow = schedule.slow_time(radar.t_pri)
    chirps = len(schedule)
    phase = slow[:, None] * doppler_bins[None, :] / (chirps * radar.t_pri)
    if couple_velocity:
        phase = phase + schedule.frequency_offsets[:, None] * 2.0 * velocities[None, :] * slow[:, None] / SPEED_OF_LIGHT
    return np.exp(-2j * math.pi * phase)


def nonuniform_slow_time_transform(
    compensated: np.ndarray,
    schedule: ChirpSchedule,
    radar: RadarParams,
    grids: Optional[RdGrids] = None,
    *,
    couple_velocity: bool = True,
) -> RdCube:
    """Contract the chirp axis of an (M, K, P) array with the nonuniform steering matrix."""

    grids = grids or rd_grids(radar)
    steering = slow_time_steering(
        schedule, radar, grids.velocities, grids.doppler_bins, couple_velocity=couple_velocity
    )
    m_count, k_count, p_count = compensated.shape
    flat = compensated.transpose(0, 2, 1).reshape(m_count * p_count, k_count)
    values = (flat @ steering).reshape(m_count, p_count, -1).transpose(0, 2, 1)
    return RdCube(values=values, grids=grids)


def process_cpi(
    adc: Union[AdcMatrix, np.ndarray],
    schedule: ChirpSchedule,
    radar: RadarParams,
    *,
    fine_points: int = FINE_RANGE_POINTS,
) -> RdCube:
    """Coarse transform, hop compensation and slow-time transform of one CPI."""

    grids = rd_grids(radar, fine_points=fine_points)
    coarse = coarse_range_transform(adc)
    compensated = hop_time_compensate(coarse, schedule, grids.ranges, grids.fine)
    return nonuniform_slow_time_transform(compensated, schedule, radar, grids)


def detect_peak(cube: RdCube) -> Detection:
    """Global magnitude peak; ``np.argmax`` keeps the smallest flat index on ties."""

    magnitude = np.abs(cube.values)
    if magnitude.size == 0:
        raise ScenarioError("cannot detect a peak in an empty cube")
    m, q, p = np.unravel_index(int(np.argmax(magnitude)), magnitude.shape)
    grids = cube.grids
    return Detection(
        m=int(m),
        q=int(q),
        p=int(p),
        range=float(grids.ranges[m] + grids.fine[p]),
        velocity=float(grids.velocities[q]),
        magnitude=float(magnitude[m, q, p]),
    )


def write_rd_cube_csv(cube: RdCube, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cube.to_frame().to_csv(path, index=False)
    return path


__all__ = [
    "FINE_RANGE_POINTS",
    "RdGrids",
    "RdCube",
    "Detection",
    "rd_grids",
    "coarse_range_transform",
    "hop_time_compensate",
    "slow_time_steering",
    "nonuniform_slow_time_transform",
    "process_cpi",
    "detect_peak",
    "write_rd_cube_csv",
]
