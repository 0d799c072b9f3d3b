from __future__ import annotations

import numpy as np
import pytest

from noregret_hopping.config import scenario_from_mapping
from noregret_hopping.feedback import (
    UTILITY_FLOOR,
    UtilityMap,
    cpi_feedback,
    cpi_utility,
    estimate_per_action_sinr,
    estimate_per_action_snr,
    saturating_utility,
)
from noregret_hopping.model import MixedStrategy, ScenarioError, Target, build_action_space
from noregret_hopping.scheduler import action_schedule, stochastic_round_robin
from noregret_hopping.waveform import ChirpPowers, fast_power_sim, link_budget_snr, synthesize_cpi_adc


def make_powers(signal, interference, noise=1.0) -> ChirpPowers:
    signal = np.asarray(signal, dtype=float)
    interference = np.asarray(interference, dtype=float)
    noise = np.full(signal.shape, noise)
    return ChirpPowers(signal=signal, interference=interference, noise=noise, total=signal + interference + noise)


def static_schedule(action: int, block_length: int, chirps: int, space):
    # a point mass restarts every block on its own cell
    strategy = MixedStrategy.point_mass(len(space), action)
    return stochastic_round_robin(strategy, block_length, chirps, space, np.random.default_rng(0))


def test_saturating_utility_shape() -> None:
    mapping = UtilityMap(beta=2.0, s0=10.0)

    assert saturating_utility(10.0, mapping) == pytest.approx(0.5)
    assert saturating_utility(0.0, mapping) == 0.0
    assert saturating_utility(20.0, mapping) == pytest.approx(0.8)
    assert saturating_utility(1e300, mapping) == pytest.approx(1.0)
    assert mapping(5.0) < mapping(6.0)
    with pytest.raises(ScenarioError):
        saturating_utility(-1.0, mapping)
    with pytest.raises(ScenarioError):
        UtilityMap(beta=0.0)


def test_utility_map_is_anchored_on_nominal_snr() -> None:
    scenario = scenario_from_mapping({"radar_defaults": {"b_mhz": 150, "chirps": 8}})

    mapping = UtilityMap.for_scenario(scenario, 0, beta=3.0)

    reference = Target(range=25.0, velocity=0.0, rcs_dbsm=20.0)
    assert mapping.beta == 3.0
    assert mapping.s0 == pytest.approx(link_budget_snr(scenario.radars[0], reference, scenario.noise_power))


def test_cpi_utility_stays_inside_open_interval() -> None:
    mapping = UtilityMap(s0=1.0)

    assert cpi_utility(np.array([0.0, 0.0]), mapping) == UTILITY_FLOOR
    assert cpi_utility(np.array([1e200]), mapping) == 1.0 - UTILITY_FLOOR
    assert cpi_utility(np.array([0.5, 1.5]), mapping) == pytest.approx(0.5)
    with pytest.raises(ScenarioError):
        cpi_utility(np.array([]), mapping)


def test_per_action_tables_average_over_chirps_of_each_pair() -> None:
    space = build_action_space(3, 150e6, 7, 3e-6, 77e9)
    schedule = static_schedule(space.flat_index(1, 1), 2, 4, space)
    powers = make_powers([4.0, 6.0, 8.0, 10.0], [0.0, 1.0, 1.0, 0.0])

    sinr = estimate_per_action_sinr(powers, schedule)
    snr = estimate_per_action_snr(powers, schedule)

    assert sinr == pytest.approx({(1, 1): 4.0, (2, 2): 6.5})
    assert snr == pytest.approx({(1, 1): 5.0, (2, 2): 11.0})


def test_misaligned_powers_are_rejected() -> None:
    space = build_action_space(3, 150e6, 7, 3e-6, 77e9)
    schedule = action_schedule(0, 1, 4, space)

    with pytest.raises(ScenarioError):
        estimate_per_action_sinr(make_powers([1.0, 1.0], [0.0, 0.0]), schedule)


def test_interfered_cpi_feedback_has_no_clean_snr() -> None:
    scenario = scenario_from_mapping(
        {
            "radar_defaults": {"b_mhz": 150, "chirps": 8},
            "radars": [
                {"id": "r1", "position_m": [0.0, 0.0], "targets": [{"range_m": 25.0}]},
                {"id": "r2", "position_m": [30.0, 0.0], "targets": [{"range_m": 25.0}]},
            ],
        }
    )
    space = scenario.action_space
    schedules = [static_schedule(0, 1, 8, space), static_schedule(space.flat_index(1, 2), 1, 8, space)]
    mapping = UtilityMap.for_scenario(scenario, 0)

    fast = cpi_feedback(fast_power_sim(scenario, schedules)[0], schedules[0], mapping, epoch=3)
    adc = synthesize_cpi_adc(scenario, schedules, np.random.default_rng(0), include_noise=False)[0]

    assert fast.epoch == 3
    assert list(fast.sinr) == [(1, 1)]
    assert fast.snr == {}
    assert 0.0 < fast.utility < 0.5
    assert fast.mean_sinr_db == pytest.approx(10 * np.log10(fast.mean_sinr))
    assert adc.chirp_powers().interference == pytest.approx(fast_power_sim(scenario, schedules)[0].interference, rel=0.02)
