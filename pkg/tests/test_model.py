from __future__ import annotations

import math

import numpy as np
import pytest

from noregret_hopping.model import (
    SPEED_OF_LIGHT,
    InterferenceEdge,
    InterferenceGraph,
    MixedStrategy,
    RadarParams,
    Scenario,
    ScenarioError,
    Target,
    build_action_space,
    dbm_to_watts,
    linear_to_db,
    nash_assignment,
    uniform_strategy,
)


def make_radar(radar_id: str = "r1", **changes) -> RadarParams:
    fields = dict(
        id=radar_id,
        f_c=77e9,
        bandwidth=150e6,
        t_active=8.89e-6,
        t_pri=29.99e-6,
        chirps=8,
        p_t_dbm=13.0,
    )
    fields.update(changes)
    return RadarParams(**fields)


def default_space():
    return build_action_space(3, 150e6, 7, 3e-6, 77e9)


def test_action_space_is_row_major_and_one_based() -> None:
    space = default_space()

    assert len(space) == 21
    first = space[0]
    assert (first.a, first.b) == (1, 1)
    assert first.f_a == 77e9
    assert first.t_b == 0.0
    assert space.flat_index(2, 3) == 9
    assert space[9].as_pair() == (2, 3)
    assert space.pair(9) == (1, 2)
    assert space[20].f_a == pytest.approx(77.3e9)
    assert space[20].t_b == pytest.approx(18e-6)


def test_action_space_rejects_pairs_outside_grid() -> None:
    space = default_space()

    with pytest.raises(ScenarioError):
        space.flat_index(4, 1)
    with pytest.raises(ScenarioError):
        space.pair(21)


def test_action_space_rejects_slots_beyond_pri() -> None:
    radar = make_radar(t_pri=20e-6)

    with pytest.raises(ScenarioError):
        build_action_space(3, 150e6, 7, 3e-6, 77e9, radar=radar)


def test_radar_params_validate_and_derive_sampling() -> None:
    radar = make_radar()

    assert radar.num_samples == 88
    assert radar.slope == pytest.approx(150e6 / 8.89e-6)
    assert radar.range_resolution == pytest.approx(SPEED_OF_LIGHT / 300e6)

    with pytest.raises(ScenarioError) as excinfo:
        make_radar(t_pri=5e-6, chirps=0)
    message = str(excinfo.value)
    assert "t_pri must exceed t_active" in message
    assert "chirps must be >= 1" in message


def test_power_conversions() -> None:
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(-88.0) == pytest.approx(10 ** -11.8)
    assert linear_to_db(100.0) == pytest.approx(20.0)
    assert linear_to_db(0.0) == -math.inf


def test_target_requires_positive_range() -> None:
    with pytest.raises(ScenarioError):
        Target(range=0.0, velocity=1.0)


def test_interference_graph_validation_and_aggressors() -> None:
    graph = InterferenceGraph.fully_connected(["r1", "r2", "r3", "r4"])

    assert len(graph.edges) == 12
    assert [edge.source for edge in graph.aggressors("r1")] == ["r2", "r3", "r4"]

    with pytest.raises(ScenarioError) as excinfo:
        InterferenceGraph(
            nodes=("r1", "r2"),
            edges=(InterferenceEdge("r1", "r1"), InterferenceEdge("r2", "r9")),
        )
    assert "self edge" in str(excinfo.value)
    assert "undeclared radar" in str(excinfo.value)


def test_mixed_strategy_lies_on_simplex() -> None:
    with pytest.raises(ScenarioError):
        MixedStrategy(np.array([0.5, 0.6]))
    with pytest.raises(ScenarioError):
        MixedStrategy(np.array([1.5, -0.5]))

    strategy = MixedStrategy.point_mass(5, 3)
    assert strategy.support() == [3]
    assert strategy.sample(np.random.default_rng(0)) == 3
    with pytest.raises(ValueError):
        strategy.probs[0] = 1.0

    uniform = uniform_strategy(4)
    assert uniform[2] == pytest.approx(0.25)


def test_nash_assignment_wraps_around_grid() -> None:
    space = default_space()

    assert nash_assignment(1, space).as_pair() == (1, 1)
    assert nash_assignment(4, space).as_pair() == (1, 4)
    assert nash_assignment(22, space).as_pair() == (1, 1)
    with pytest.raises(ScenarioError):
        nash_assignment(0, space)


def test_scenario_checks_slots_targets_and_graph() -> None:
    space = default_space()
    radars = (make_radar("r1", position=(0.0, 0.0)), make_radar("r2", position=(30.0, 0.0)))
    targets = ((Target(25.0, 0.0),), (Target(25.0, 0.0),))
    graph = InterferenceGraph.fully_connected(["r1", "r2"])

    scenario = Scenario(radars=radars, targets=targets, graph=graph, action_space=space)
    assert scenario.num_radars == 2
    assert scenario.radar_index("r2") == 1
    assert scenario.noise_power == pytest.approx(dbm_to_watts(-88.0))
    with pytest.raises(ScenarioError):
        scenario.radar_index("r9")

    far = ((Target(250.0, 0.0),), (Target(25.0, 0.0),))
    with pytest.raises(ScenarioError) as excinfo:
        Scenario(radars=radars, targets=far, graph=graph, action_space=space)
    assert "beyond R_u" in str(excinfo.value)

    short_pri = tuple(make_radar(radar.id, position=radar.position, t_pri=20e-6) for radar in radars)
    with pytest.raises(ScenarioError) as excinfo:
        Scenario(radars=short_pri, targets=targets, graph=graph, action_space=space)
    assert "exceeds t_pri" in str(excinfo.value)
