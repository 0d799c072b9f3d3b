"""Scenario documents: loading, validation, overrides and geometry randomisation."""

from __future__ import annotations

import copy
import json
import math
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, MutableMapping, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from .model import (
    InterferenceEdge,
    InterferenceGraph,
    RadarParams,
    Scenario,
    ScenarioError,
    Target,
    build_action_space,
)

ConfigSource = Union[str, Path, Mapping[str, Any]]


class ScenarioValidationError(ScenarioError):
    """Raised when a scenario document contains invalid values."""

    def __init__(self, errors: Iterable[str]) -> None:
        messages = list(errors)
        super().__init__("; ".join(messages) if messages else "Invalid scenario document")
        self.errors = messages


DEFAULT_SCENARIO: Dict[str, Any] = {
    "seed": 0,
    "epochs": 15,
    "noise_power_dbm": -88.0,
    "nominal_range_m": 25.0,
    "action_space": {
        "subbands": 3,
        "time_slots": 7,
        "subband_spacing_mhz": 150.0,
        "slot_spacing_us": 3.0,
    },
    "radar_defaults": {
        "f_c_ghz": 77.0,
        "b_mhz": "random",
        "b_range_mhz": [110.0, 150.0],
        "t_a_us": 8.89,
        "t_pri_us": 29.99,
        "chirps": 256,
        "p_t_dbm": 13.0,
        "antenna_gain_dbi": 20.0,
        "adc_rate_msps": 10.0,
    },
    "geometry": {
        "num_radars": 4,
        "polygon_radius_m": 25.0,
        "position_jitter_m": 5.0,
        "target_jitter_m": 2.0,
        "velocity_range_mps": [-25.0, 25.0],
        "max_range_m": 200.0,
    },
    "target": {"rcs_dbsm": 20.0},
    "graph": {"kind": "full", "delay_us": 0.0},
}

_TOP_KEYS = set(DEFAULT_SCENARIO) | {"radars"}
_ACTION_KEYS = set(DEFAULT_SCENARIO["action_space"])
_RADAR_KEYS = set(DEFAULT_SCENARIO["radar_defaults"])
_GEOMETRY_KEYS = set(DEFAULT_SCENARIO["geometry"])
_TARGET_KEYS = {"rcs_dbsm"}
_GRAPH_KEYS = {"kind", "delay_us", "edges"}
_RADAR_ITEM_KEYS = _RADAR_KEYS | {"id", "position_m", "targets"}
_TARGET_ITEM_KEYS = {"range_m", "velocity_mps", "rcs_dbsm"}
_EDGE_KEYS = {"source", "target", "delay_us"}
_GRAPH_KINDS = {"full", "none", "explicit"}


# ---------------------------------------------------------------------------
# loading and overrides


def load_config_source(source: ConfigSource) -> Dict[str, Any]:
    """Return a mapping from a mapping, a YAML/JSON file path, or YAML text."""

    if isinstance(source, Mapping):
        return copy.deepcopy(dict(source))

    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and os.path.exists(source)):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioValidationError([f"{path}: unable to read ({exc})"]) from exc
        suffix = path.suffix.lower()
        if suffix == ".json":
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ScenarioValidationError([f"{path}: invalid JSON ({exc})"]) from exc
        elif suffix in {".yaml", ".yml"}:
            data = _parse_yaml(text, origin=str(path))
        else:
            raise ScenarioValidationError([f"{path}: unsupported config format '{suffix}'"])
    elif isinstance(source, str):
        data = _parse_yaml(source, origin="<text>")
    else:
        raise ScenarioValidationError(["config source must be a mapping, a path, or YAML text"])

    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise ScenarioValidationError(["document root must be a mapping"])
    return dict(data)


def _parse_yaml(text: str, *, origin: str) -> Any:
    try:
        return yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ScenarioValidationError([f"{origin}: invalid YAML ({exc})"]) from exc


def coerce_value(raw: str) -> Any:
    """Convert an override value into a Python literal (JSON first, then plain text)."""

    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        lowered = raw.lower()
        if lowered in {"true", "false"}:
            return lowered == "true"
        if lowered == "null":
            return None
        return raw


def assign_path(mapping: MutableMapping[str, Any], path: str, value: Any) -> None:
    parts = [segment for segment in path.split(".") if segment]
    if not parts:
        raise ScenarioValidationError([f"invalid override key '{path}'"])
    current: MutableMapping[str, Any] = mapping
    for segment in parts[:-1]:
        nested = current.get(segment)
        if not isinstance(nested, MutableMapping):
            nested = {}
            current[segment] = nested
        current = nested
    current[parts[-1]] = value


def apply_overrides(mapping: MutableMapping[str, Any], overrides: Iterable[str]) -> MutableMapping[str, Any]:
    """Apply ``KEY=VALUE`` overrides with dotted keys in place."""

    for item in overrides:
        if "=" not in item:
            raise ScenarioValidationError([f"override '{item}' must use KEY=VALUE format"])
        key, raw_value = item.split("=", 1)
        assign_path(mapping, key.strip(), coerce_value(raw_value))
    return mapping


def _deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


# ---------------------------------------------------------------------------
# validation


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _check_number(
    errors: List[str],
    path: str,
    value: Any,
    *,
    positive: bool = False,
    minimum: Optional[float] = None,
    integer: bool = False,
) -> None:
    if integer:
        if not isinstance(value, int) or isinstance(value, bool):
            errors.append(f"{path}: must be an integer")
            return
    elif not _is_number(value):
        errors.append(f"{path}: must be a finite number")
        return
    if positive and value <= 0:
        errors.append(f"{path}: must be > 0")
    if minimum is not None and value < minimum:
        errors.append(f"{path}: must be >= {minimum:g}")


def _check_range_pair(errors: List[str], path: str, value: Any, *, positive: bool = False) -> None:
    if not isinstance(value, Sequence) or isinstance(value, str) or len(value) != 2:
        errors.append(f"{path}: must be a [low, high] pair")
        return
    if not all(_is_number(item) for item in value):
        errors.append(f"{path}: entries must be finite numbers")
        return
    if value[0] > value[1]:
        errors.append(f"{path}: low must not exceed high")
    if positive and value[0] <= 0:
        errors.append(f"{path}: entries must be > 0")


def _check_unknown(errors: List[str], path: str, value: Mapping[str, Any], allowed: Iterable[str]) -> None:
    allowed_set = set(allowed)
    for key in value:
        if key not in allowed_set:
            prefix = f"{path}." if path else ""
            errors.append(f"{prefix}{key}: unknown key")


def _check_section(errors: List[str], path: str, value: Any, allowed: Iterable[str]) -> bool:
    if not isinstance(value, Mapping):
        errors.append(f"{path}: must be a mapping")
        return False
    _check_unknown(errors, path, value, allowed)
    return True


def _validate_radar_fields(errors: List[str], path: str, fields: Mapping[str, Any]) -> None:
    for key in ("f_c_ghz", "t_a_us", "t_pri_us", "adc_rate_msps"):
        if key in fields:
            _check_number(errors, f"{path}.{key}", fields[key], positive=True)
    for key in ("p_t_dbm", "antenna_gain_dbi"):
        if key in fields:
            _check_number(errors, f"{path}.{key}", fields[key])
    if "chirps" in fields:
        _check_number(errors, f"{path}.chirps", fields["chirps"], integer=True, minimum=1)
    if "b_mhz" in fields and fields["b_mhz"] != "random":
        _check_number(errors, f"{path}.b_mhz", fields["b_mhz"], positive=True)
    if "b_range_mhz" in fields:
        _check_range_pair(errors, f"{path}.b_range_mhz", fields["b_range_mhz"], positive=True)
    t_a = fields.get("t_a_us")
    t_pri = fields.get("t_pri_us")
    if _is_number(t_a) and _is_number(t_pri) and t_a >= t_pri:
        errors.append(f"{path}.t_a_us: must be < t_pri_us")


def validate_scenario_mapping(document: Mapping[str, Any]) -> None:
    """Collect every problem of a user document and raise them together."""

    errors: List[str] = []
    if not isinstance(document, Mapping):
        raise ScenarioValidationError(["document root must be a mapping"])
    _check_unknown(errors, "", document, _TOP_KEYS)

    if "seed" in document:
        _check_number(errors, "seed", document["seed"], integer=True, minimum=0)
    if "epochs" in document:
        _check_number(errors, "epochs", document["epochs"], integer=True, minimum=1)
    if "noise_power_dbm" in document:
        _check_number(errors, "noise_power_dbm", document["noise_power_dbm"])
    if "nominal_range_m" in document:
        _check_number(errors, "nominal_range_m", document["nominal_range_m"], positive=True)

    action = document.get("action_space")
    if action is not None and _check_section(errors, "action_space", action, _ACTION_KEYS):
        for key in ("subbands", "time_slots"):
            if key in action:
                _check_number(errors, f"action_space.{key}", action[key], integer=True, minimum=1)
        for key in ("subband_spacing_mhz", "slot_spacing_us"):
            if key in action:
                _check_number(errors, f"action_space.{key}", action[key], positive=True)

    defaults = document.get("radar_defaults")
    if defaults is not None and _check_section(errors, "radar_defaults", defaults, _RADAR_KEYS):
        _validate_radar_fields(errors, "radar_defaults", defaults)

    geometry = document.get("geometry")
    if geometry is not None and _check_section(errors, "geometry", geometry, _GEOMETRY_KEYS):
        if "num_radars" in geometry:
            _check_number(errors, "geometry.num_radars", geometry["num_radars"], integer=True, minimum=1)
        for key in ("polygon_radius_m", "position_jitter_m", "target_jitter_m"):
            if key in geometry:
                _check_number(errors, f"geometry.{key}", geometry[key], minimum=0.0)
        if "max_range_m" in geometry:
            _check_number(errors, "geometry.max_range_m", geometry["max_range_m"], positive=True)
        if "velocity_range_mps" in geometry:
            _check_range_pair(errors, "geometry.velocity_range_mps", geometry["velocity_range_mps"])

    target = document.get("target")
    if target is not None and _check_section(errors, "target", target, _TARGET_KEYS):
        if "rcs_dbsm" in target:
            _check_number(errors, "target.rcs_dbsm", target["rcs_dbsm"])

    radars = document.get("radars")
    radar_ids: List[str] = []
    if radars is not None:
        if not isinstance(radars, Sequence) or isinstance(radars, str) or not radars:
            errors.append("radars: must be a non-empty list")
        else:
            for idx, item in enumerate(radars):
                path = f"radars[{idx}]"
                if not _check_section(errors, path, item, _RADAR_ITEM_KEYS):
                    continue
                radar_ids.append(str(item.get("id", f"r{idx + 1}")))
                _validate_radar_fields(errors, path, item)
                position = item.get("position_m")
                if position is not None and position != "random":
                    if (
                        not isinstance(position, Sequence)
                        or isinstance(position, str)
                        or len(position) != 2
                        or not all(_is_number(value) for value in position)
                    ):
                        errors.append(f"{path}.position_m: must be [x, y] or 'random'")
                targets = item.get("targets")
                if targets is not None:
                    if not isinstance(targets, Sequence) or isinstance(targets, str):
                        errors.append(f"{path}.targets: must be a list")
                        continue
                    for t_idx, entry in enumerate(targets):
                        t_path = f"{path}.targets[{t_idx}]"
                        if not _check_section(errors, t_path, entry, _TARGET_ITEM_KEYS):
                            continue
                        if "range_m" not in entry:
                            errors.append(f"{t_path}.range_m: required")
                        else:
                            _check_number(errors, f"{t_path}.range_m", entry["range_m"], positive=True)
                        if "velocity_mps" in entry:
                            _check_number(errors, f"{t_path}.velocity_mps", entry["velocity_mps"])
                        if "rcs_dbsm" in entry:
                            _check_number(errors, f"{t_path}.rcs_dbsm", entry["rcs_dbsm"])
            if len(set(radar_ids)) != len(radar_ids):
                errors.append("radars: ids must be unique")

    graph = document.get("graph")
    if graph is not None and _check_section(errors, "graph", graph, _GRAPH_KEYS):
        kind = graph.get("kind", "full")
        if kind not in _GRAPH_KINDS:
            errors.append("graph.kind: must be full|none|explicit")
        if "delay_us" in graph:
            _check_number(errors, "graph.delay_us", graph["delay_us"], minimum=0.0)
        edges = graph.get("edges")
        if edges is not None and kind != "explicit":
            errors.append("graph.edges: only allowed when kind is 'explicit'")
        if kind == "explicit":
            if not isinstance(edges, Sequence) or isinstance(edges, str):
                errors.append("graph.edges: must be a list")
            else:
                for e_idx, edge in enumerate(edges):
                    e_path = f"graph.edges[{e_idx}]"
                    if not _check_section(errors, e_path, edge, _EDGE_KEYS):
                        continue
                    for key in ("source", "target"):
                        if key not in edge:
                            errors.append(f"{e_path}.{key}: required")
                    if edge.get("source") is not None and edge.get("source") == edge.get("target"):
                        errors.append(f"{e_path}: self edges are not allowed")
                    if "delay_us" in edge:
                        _check_number(errors, f"{e_path}.delay_us", edge["delay_us"], minimum=0.0)
                    if radar_ids:
                        for key in ("source", "target"):
                            if key in edge and str(edge[key]) not in radar_ids:
                                errors.append(f"{e_path}.{key}: undeclared radar '{edge[key]}'")

    if errors:
        raise ScenarioValidationError(errors)


# ---------------------------------------------------------------------------
# construction


def _disk_offset(rng: np.random.Generator, radius: float) -> np.ndarray:
    if radius <= 0:
        return np.zeros(2)
    distance = radius * math.sqrt(rng.uniform())
    angle = rng.uniform(0.0, 2.0 * math.pi)
    return np.array([distance * math.cos(angle), distance * math.sin(angle)])


def _radar_from_fields(
    radar_id: str,
    fields: Mapping[str, Any],
    position: Tuple[float, float],
    rng: np.random.Generator,
) -> RadarParams:
    bandwidth_mhz = fields["b_mhz"]
    if bandwidth_mhz == "random":
        low, high = fields["b_range_mhz"]
        bandwidth_mhz = float(rng.uniform(low, high))
    return RadarParams(
        id=radar_id,
        f_c=float(fields["f_c_ghz"]) * 1e9,
        bandwidth=float(bandwidth_mhz) * 1e6,
        t_active=float(fields["t_a_us"]) * 1e-6,
        t_pri=float(fields["t_pri_us"]) * 1e-6,
        chirps=int(fields["chirps"]),
        p_t_dbm=float(fields["p_t_dbm"]),
        position=(float(position[0]), float(position[1])),
        antenna_gain_dbi=float(fields["antenna_gain_dbi"]),
        adc_rate=float(fields["adc_rate_msps"]) * 1e6,
    )


def scenario_from_mapping(document: Mapping[str, Any], *, seed: Optional[int] = None) -> Scenario:
    """Validate ``document`` and build a Scenario; ``seed`` overrides the document seed."""

    validate_scenario_mapping(document)
    resolved = _deep_merge(DEFAULT_SCENARIO, document)
    base_seed = int(resolved["seed"] if seed is None else seed)
    rng = np.random.default_rng(base_seed)

    action_cfg = resolved["action_space"]
    geometry = resolved["geometry"]
    defaults = resolved["radar_defaults"]
    rcs_default = float(resolved["target"]["rcs_dbsm"])

    items = resolved.get("radars")
    if items is None:
        items = [{} for _ in range(int(geometry["num_radars"]))]
    count = len(items)

    # radar draws first, then the shared target position, then per-radar velocities
    radars: List[RadarParams] = []
    explicit_targets: List[Optional[List[Mapping[str, Any]]]] = []
    for idx, item in enumerate(items):
        radar_id = str(item.get("id", f"r{idx + 1}"))
        fields = {key: item.get(key, defaults[key]) for key in _RADAR_KEYS}
        position = item.get("position_m", "random")
        if position == "random":
            angle = 2.0 * math.pi * idx / count
            vertex = float(geometry["polygon_radius_m"]) * np.array([math.cos(angle), math.sin(angle)])
            position = tuple(vertex + _disk_offset(rng, float(geometry["position_jitter_m"])))
        try:
            radars.append(_radar_from_fields(radar_id, fields, position, rng))
        except ScenarioError as exc:
            raise ScenarioValidationError([f"radars[{idx}]: {exc}"]) from exc
        explicit_targets.append(item.get("targets"))

    target_position = _disk_offset(rng, float(geometry["target_jitter_m"]))
    v_low, v_high = geometry["velocity_range_mps"]
    targets: List[Tuple[Target, ...]] = []
    errors: List[str] = []
    for idx, (radar, explicit) in enumerate(zip(radars, explicit_targets)):
        velocity = float(rng.uniform(v_low, v_high))
        try:
            if explicit is None:
                distance = float(np.hypot(*(np.asarray(radar.position) - target_position)))
                targets.append((Target(range=distance, velocity=velocity, rcs_dbsm=rcs_default),))
            else:
                targets.append(
                    tuple(
                        Target(
                            range=float(entry["range_m"]),
                            velocity=float(entry.get("velocity_mps", 0.0)),
                            rcs_dbsm=float(entry.get("rcs_dbsm", rcs_default)),
                        )
                        for entry in explicit
                    )
                )
        except ScenarioError as exc:
            errors.append(f"radars[{idx}].targets: {exc}")
    if errors:
        raise ScenarioValidationError(errors)

    ids = [radar.id for radar in radars]
    graph_cfg = resolved["graph"]
    kind = graph_cfg.get("kind", "full")
    if kind == "full":
        graph = InterferenceGraph.fully_connected(ids, delay=float(graph_cfg.get("delay_us", 0.0)) * 1e-6)
    elif kind == "none":
        graph = InterferenceGraph(nodes=tuple(ids))
    else:
        default_delay = float(graph_cfg.get("delay_us", 0.0))
        edges = tuple(
            InterferenceEdge(
                source=str(edge["source"]),
                target=str(edge["target"]),
                delay=float(edge.get("delay_us", default_delay)) * 1e-6,
            )
            for edge in graph_cfg.get("edges", [])
        )
        try:
            graph = InterferenceGraph(nodes=tuple(ids), edges=edges)
        except ScenarioError as exc:
            raise ScenarioValidationError([f"graph.edges: {exc}"]) from exc

    try:
        action_space = build_action_space(
            int(action_cfg["subbands"]),
            float(action_cfg["subband_spacing_mhz"]) * 1e6,
            int(action_cfg["time_slots"]),
            float(action_cfg["slot_spacing_us"]) * 1e-6,
            radars[0].f_c,
        )
        return Scenario(
            radars=tuple(radars),
            targets=tuple(targets),
            graph=graph,
            action_space=action_space,
            noise_power_dbm=float(resolved["noise_power_dbm"]),
            epochs=int(resolved["epochs"]),
            seed=base_seed,
            max_range=float(geometry["max_range_m"]),
            nominal_range=float(resolved["nominal_range_m"]),
            nominal_rcs_dbsm=rcs_default,
        )
    except ScenarioValidationError:
        raise
    except ScenarioError as exc:
        raise ScenarioValidationError([f"scenario: {exc}"]) from exc


def load_scenario(
    source: ConfigSource,
    *,
    seed: Optional[int] = None,
    overrides: Iterable[str] = (),
) -> Scenario:
    """Load, override, validate and build a scenario document."""

    document = load_config_source(source)
    apply_overrides(document, overrides)
    return scenario_from_mapping(document, seed=seed)


def scenario_to_mapping(scenario: Scenario) -> Dict[str, Any]:
    """Explicit document that rebuilds ``scenario`` without drawing random values."""

    space = scenario.action_space
    radars: List[Dict[str, Any]] = []
    for radar, targets in zip(scenario.radars, scenario.targets):
        radars.append(
            {
                "id": radar.id,
                "position_m": [float(radar.position[0]), float(radar.position[1])],
                "f_c_ghz": radar.f_c / 1e9,
                "b_mhz": radar.bandwidth / 1e6,
                "t_a_us": radar.t_active * 1e6,
                "t_pri_us": radar.t_pri * 1e6,
                "chirps": radar.chirps,
                "p_t_dbm": radar.p_t_dbm,
                "antenna_gain_dbi": radar.antenna_gain_dbi,
                "adc_rate_msps": radar.adc_rate / 1e6,
                "targets": [
                    {"range_m": target.range, "velocity_mps": target.velocity, "rcs_dbsm": target.rcs_dbsm}
                    for target in targets
                ],
            }
        )
    return {
        "seed": scenario.seed,
        "epochs": scenario.epochs,
        "noise_power_dbm": scenario.noise_power_dbm,
        "nominal_range_m": scenario.nominal_range,
        "action_space": {
            "subbands": space.num_subbands,
            "time_slots": space.num_slots,
            "subband_spacing_mhz": space.subband_spacing / 1e6,
            "slot_spacing_us": space.slot_spacing * 1e6,
        },
        "geometry": {"max_range_m": scenario.max_range},
        "target": {"rcs_dbsm": scenario.nominal_rcs_dbsm},
        "radars": radars,
        "graph": {
            "kind": "explicit",
            "edges": [
                {"source": edge.source, "target": edge.target, "delay_us": edge.delay * 1e6}
                for edge in scenario.graph.edges
            ],
        },
    }


__all__ = [
    "DEFAULT_SCENARIO",
    "ScenarioValidationError",
    "load_config_source",
    "coerce_value",
    "assign_path",
    "apply_overrides",
    "validate_scenario_mapping",
    "scenario_from_mapping",
    "load_scenario",
    "scenario_to_mapping",
]
