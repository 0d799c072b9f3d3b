from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from noregret_hopping.config import scenario_from_mapping
from noregret_hopping.model import SPEED_OF_LIGHT, MixedStrategy, uniform_strategy
from noregret_hopping.processing import (
    FINE_RANGE_POINTS,
    coarse_range_transform,
    detect_peak,
    hop_time_compensate,
    nonuniform_slow_time_transform,
    process_cpi,
    rd_grids,
    write_rd_cube_csv,
)
from noregret_hopping.scheduler import action_schedule, stochastic_round_robin
from noregret_hopping.waveform import synthesize_cpi_adc


def single_radar_scenario(range_m: float = 25.0, velocity_mps: float = -10.0, chirps: int = 64):
    return scenario_from_mapping(
        {
            "radar_defaults": {"b_mhz": 150, "chirps": chirps},
            "radars": [
                {
                    "id": "solo",
                    "position_m": [0.0, 0.0],
                    "targets": [{"range_m": range_m, "velocity_mps": velocity_mps}],
                }
            ],
            "graph": {"kind": "none"},
        }
    )


def test_grids_follow_radar_geometry() -> None:
    radar = single_radar_scenario().radars[0]

    grids = rd_grids(radar)

    assert grids.ranges.shape == (88,)
    assert grids.ranges[1] == pytest.approx(SPEED_OF_LIGHT * 10e6 / (2 * radar.slope * 88))
    assert grids.doppler_bins[0] == -32
    assert grids.doppler_bins[-1] == 31
    assert grids.velocities[33] == pytest.approx(SPEED_OF_LIGHT / (2 * 77e9 * 64 * 29.99e-6))
    assert grids.fine.shape == (FINE_RANGE_POINTS,)
    assert grids.fine[0] == pytest.approx(-SPEED_OF_LIGHT / (4 * 150e6))
    assert grids.fine[-1] == pytest.approx(SPEED_OF_LIGHT / (4 * 150e6))


def test_coarse_transform_matches_direct_dft() -> None:
    rng = np.random.default_rng(0)
    data = rng.standard_normal((16, 4)) + 1j * rng.standard_normal((16, 4))

    result = coarse_range_transform(data)

    n = np.arange(16)
    direct = np.exp(-2j * np.pi * np.outer(n, n) / 16) @ data
    assert np.allclose(result, direct)
    assert np.sum(np.abs(result) ** 2) == pytest.approx(16 * np.sum(np.abs(data) ** 2))


def test_uniform_schedule_reduces_to_standard_doppler_fft() -> None:
    scenario = single_radar_scenario(chirps=16)
    radar = scenario.radars[0]
    grids = rd_grids(radar)
    # a point mass with one chirp per block never leaves its cell
    parked = MixedStrategy.point_mass(21, 0)
    schedule = stochastic_round_robin(parked, 1, 16, scenario.action_space, np.random.default_rng(0))
    rng = np.random.default_rng(1)
    coarse = rng.standard_normal((88, 16)) + 1j * rng.standard_normal((88, 16))

    compensated = hop_time_compensate(coarse, schedule, grids.ranges, grids.fine)
    for p in range(FINE_RANGE_POINTS):
        assert np.allclose(compensated[:, :, p], coarse)

    cube = nonuniform_slow_time_transform(compensated, schedule, radar, grids)
    reference = np.fft.fft(coarse, axis=1)
    for index, q in enumerate(grids.doppler_bins):
        assert np.allclose(cube.values[:, index, 0], reference[:, q % 16])


@pytest.mark.parametrize("seed", range(20))
def test_hopped_cpi_detects_target_within_resolution(seed: int) -> None:
    scenario = single_radar_scenario()
    radar = scenario.radars[0]
    rng = np.random.default_rng(seed)
    schedule = stochastic_round_robin(uniform_strategy(21), 1, radar.chirps, scenario.action_space, rng)

    adc = synthesize_cpi_adc(scenario, [schedule], rng)[0]
    detection = detect_peak(process_cpi(adc, schedule, radar))

    velocity_bin = SPEED_OF_LIGHT / (2 * radar.f_c * radar.chirps * radar.t_pri)
    assert abs(detection.range - 25.0) <= SPEED_OF_LIGHT / (4 * radar.bandwidth)
    assert abs(detection.velocity - (-10.0)) <= velocity_bin


def test_coherent_gain_is_close_to_samples_times_chirps() -> None:
    on_grid = single_radar_scenario()
    grids = rd_grids(on_grid.radars[0])
    scenario = single_radar_scenario(range_m=float(grids.ranges[25]), velocity_mps=float(grids.velocities[24]))
    radar = scenario.radars[0]
    rng = np.random.default_rng(5)
    schedule = stochastic_round_robin(uniform_strategy(21), 1, radar.chirps, scenario.action_space, rng)

    adc = synthesize_cpi_adc(scenario, [schedule], rng)[0]
    clean_peak = np.max(np.abs(process_cpi(adc.clean, schedule, radar).values) ** 2)
    noise_floor = np.mean(np.abs(process_cpi(adc.noise, schedule, radar).values) ** 2)

    signal_power = float(np.mean(np.abs(adc.clean) ** 2))
    gain_db = 10 * np.log10(clean_peak / signal_power) - 10 * np.log10(noise_floor / scenario.noise_power)
    assert abs(gain_db - 10 * np.log10(88 * radar.chirps)) <= 3.0


def test_rd_cube_csv_has_one_row_per_cell(tmp_path: Path) -> None:
    scenario = single_radar_scenario(chirps=8)
    radar = scenario.radars[0]
    schedule = action_schedule(3, 1, 8, scenario.action_space)
    adc = synthesize_cpi_adc(scenario, [schedule], np.random.default_rng(0))[0]
    cube = process_cpi(adc, schedule, radar)

    path = write_rd_cube_csv(cube, tmp_path / "cube.csv")

    frame = pd.read_csv(path)
    assert len(frame) == 88 * 8 * FINE_RANGE_POINTS
    assert list(frame.columns) == ["m", "q", "p", "range_m", "velocity_mps", "magnitude_db"]
    assert frame["q"].min() == -4
    assert frame["q"].max() == 3
