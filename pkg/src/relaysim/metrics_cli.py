"""Scenario configuration, trace logging, summaries, and the CLI.

Scenarios are YAML files with a strict schema: unknown keys are
rejected with their full field path, and every numeric invariant is
checked at load time. A run writes one CSV trace (repr-precision
floats, so equal seeds reproduce byte-identical files) plus a JSON
summary whose metrics are all recomputable from the trace alone.

Exit codes: 0 success, 2 usage, 3 scenario file missing, 4 invalid
configuration, 5 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import importlib.resources
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from . import _kernels
from .antenna_scan_wca import ScanConfig, make_scan_result, wca_bearing
from .convoy_chain import RadioConfig, RateTable
from .follower_control import ControlParams, wheel_velocities
from .obstacle_avoidance import AvoidanceParams
from .radio_propagation import AntennaPattern, PathLossModel, velocity_components
from .sim_engine import (
    NodeSetup,
    Pose,
    RobotState,
    Segment,
    Simulation,
    SonarGeometry,
    Waypoint,
    WorldModel,
    rect_segments,
)

PRESET_NAMES = ("indoor_corridor", "outdoor_lot", "obstacle_course",
                "convergence_bench")

EXIT_MISSING = 3
EXIT_INVALID = 4
EXIT_RUNTIME = 5


class ConfigMissingError(Exception):
    pass


class ConfigInvalidError(Exception):
    pass


class SimulationRuntimeError(Exception):
    pass


@dataclass
class NodeSpec:
    """One chain node as configured: identity, start pose, script."""

    name: str
    role: str
    pose: Pose
    antenna_center_rad: float = 0.0
    speed_m_s: float = 0.2
    initial_dwell_s: float = 0.0
    waypoints: list[Waypoint] = field(default_factory=list)
    control: Optional[ControlParams] = None


@dataclass
class ScenarioConfig:
    name: str
    seed: int
    duration_s: float
    world: WorldModel
    radio: RadioConfig
    scan: ScanConfig
    control: ControlParams
    avoidance: AvoidanceParams
    sonar: SonarGeometry
    nodes: list[NodeSpec]
    axle_width_m: float = 0.4
    collision_radius_m: float = 0.3
    intra_scan_leader_motion: bool = False


# ---------------------------------------------------------------------------
# Strict config parsing


def _require_mapping(value: Any, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigInvalidError(f"{path}: expected a mapping")
    return value


def _check_known(raw: dict, allowed: set[str], path: str) -> None:
    unknown = set(raw) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigInvalidError(f"{path}.{key}: unknown key")


def _get(raw: dict, key: str, path: str, kind, default=None, required=False):
    if key not in raw or raw[key] is None:
        if required:
            raise ConfigInvalidError(f"{path}.{key}: required")
        return default
    value = raw[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigInvalidError(f"{path}.{key}: expected a number")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigInvalidError(f"{path}.{key}: expected an integer")
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigInvalidError(f"{path}.{key}: expected a boolean")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigInvalidError(f"{path}.{key}: expected a string")
        return value
    if kind is list:
        if not isinstance(value, list):
            raise ConfigInvalidError(f"{path}.{key}: expected a list")
        return value
    raise AssertionError(f"unhandled kind {kind}")


def _floats(raw: dict, key: str, path: str, count: int, required=False,
            default=None):
    value = _get(raw, key, path, list, default=None, required=required)
    if value is None:
        return default
    if len(value) != count or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
        raise ConfigInvalidError(f"{path}.{key}: expected {count} numbers")
    return tuple(float(v) for v in value)


def _parse_world(raw: dict, path: str) -> WorldModel:
    raw = _require_mapping(raw, path)
    _check_known(raw, {"bounds", "obstacles", "annotations"}, path)
    bounds = _floats(raw, "bounds", path, 4, required=True)
    obstacles: list[Segment] = []
    for i, item in enumerate(_get(raw, "obstacles", path, list, default=[])):
        ipath = f"{path}.obstacles[{i}]"
        item = _require_mapping(item, ipath)
        _check_known(item, {"segment", "rect", "loss_db"}, ipath)
        loss = _get(item, "loss_db", ipath, float)
        if ("segment" in item) == ("rect" in item):
            raise ConfigInvalidError(f"{ipath}: exactly one of segment/rect")
        if "segment" in item:
            x1, y1, x2, y2 = _floats(item, "segment", ipath, 4, required=True)
            obstacles.append(Segment(x1, y1, x2, y2, loss))
        else:
            x, y, w, h = _floats(item, "rect", ipath, 4, required=True)
            obstacles.extend(rect_segments(x, y, w, h, loss))
    annotations = {}
    for key, value in _require_mapping(raw.get("annotations"),
                                       f"{path}.annotations").items():
        xy = _floats({"p": value}, "p", f"{path}.annotations.{key}", 2,
                     required=True)
        annotations[str(key)] = xy
    world = WorldModel(bounds=bounds, obstacles=obstacles,
                       annotations=annotations)
    try:
        world.validate()
    except ValueError as e:
        raise ConfigInvalidError(f"{path}: {e}") from e
    return world


def _parse_rate_table(raw: Any, path: str) -> RateTable:
    raw = _require_mapping(raw, path)
    _check_known(raw, {"thresholds_dbm", "rates_mbps"}, path)
    thresholds = _get(raw, "thresholds_dbm", path, list, required=True)
    rates = _get(raw, "rates_mbps", path, list, required=True)
    table = RateTable(tuple(float(t) for t in thresholds),
                      tuple(float(r) for r in rates))
    try:
        table.validate()
    except ValueError as e:
        raise ConfigInvalidError(f"{path}: {e}") from e
    return table


def _parse_radio(raw: dict, antenna_raw: dict) -> RadioConfig:
    raw = _require_mapping(raw, "radio")
    _check_known(raw, {"l0_dbm", "n", "shadow_sigma_db", "multipath_m",
                       "wall_loss_db", "freq_hz", "doppler", "link_floor_dbm",
                       "rate_table"}, "radio")
    model = PathLossModel(
        l0_dbm=_get(raw, "l0_dbm", "radio", float, default=-15.0),
        n=_get(raw, "n", "radio", float, default=2.0),
        shadow_sigma_db=_get(raw, "shadow_sigma_db", "radio", float, default=0.0),
        multipath_m=_get(raw, "multipath_m", "radio", float, default=None),
        wall_loss_db=_get(raw, "wall_loss_db", "radio", float, default=10.0),
        freq_hz=_get(raw, "freq_hz", "radio", float, default=2.4e9),
    )
    try:
        model.validate()
    except ValueError as e:
        raise ConfigInvalidError(f"radio: {e}") from e

    antenna_raw = _require_mapping(antenna_raw, "antenna")
    _check_known(antenna_raw, {"gr_db", "gt_db"}, "antenna")
    rx = AntennaPattern(kind="directional",
                        gr_db=_get(antenna_raw, "gr_db", "antenna", float,
                                   default=10.0))
    tx = AntennaPattern(kind="omni",
                        gt_db=_get(antenna_raw, "gt_db", "antenna", float,
                                   default=0.0))
    if raw.get("rate_table") is not None:
        table = _parse_rate_table(raw["rate_table"], "radio.rate_table")
    else:
        table = RateTable()
    link_floor = _get(raw, "link_floor_dbm", "radio", float, default=-67.0)
    if link_floor < table.thresholds_dbm[0]:
        raise ConfigInvalidError(
            "radio.link_floor_dbm: below the lowest rate-table threshold, "
            "a connected link could carry rate 0")
    return RadioConfig(
        model=model, rx_pattern=rx, tx_pattern=tx,
        doppler_enabled=_get(raw, "doppler", "radio", bool, default=False),
        link_floor_dbm=link_floor,
        rate_table=table,
    )


def _parse_scan(raw: dict) -> ScanConfig:
    raw = _require_mapping(raw, "scan")
    _check_known(raw, {"theta_interest_rad", "half_count", "scan_rate_rad_s",
                       "gamma"}, "scan")
    cfg = ScanConfig(
        theta_interest=_get(raw, "theta_interest_rad", "scan", float,
                            default=math.pi),
        half_count=_get(raw, "half_count", "scan", int, default=12),
        scan_rate=_get(raw, "scan_rate_rad_s", "scan", float, default=math.pi),
        gamma=_get(raw, "gamma", "scan", float, default=10.0),
    )
    try:
        cfg.validate()
    except ValueError as e:
        raise ConfigInvalidError(f"scan: {e}") from e
    return cfg


_CONTROL_KEYS = {"kp", "kd", "omega1", "omega2", "threshold_l", "threshold_b",
                 "v_max"}


def _parse_control(raw: dict, path: str,
                   base: Optional[ControlParams] = None) -> ControlParams:
    raw = _require_mapping(raw, path)
    _check_known(raw, _CONTROL_KEYS, path)
    if base is None:
        base = ControlParams()
    params = replace(
        base,
        **{key: _get(raw, key, path, float, default=getattr(base, key))
           for key in _CONTROL_KEYS})
    try:
        params.validate()
    except ValueError as e:
        raise ConfigInvalidError(f"{path}: {e}") from e
    return params


def _parse_avoidance(raw: dict) -> AvoidanceParams:
    raw = _require_mapping(raw, "avoidance")
    _check_known(raw, {"d_crit", "threshold_o", "alpha", "beta",
                       "gamma_sonar"}, "avoidance")
    params = AvoidanceParams(
        d_crit=_get(raw, "d_crit", "avoidance", float, default=1.0),
        threshold_o=_get(raw, "threshold_o", "avoidance", float, default=800.0),
        alpha=_get(raw, "alpha", "avoidance", float, default=20.0),
        beta=_get(raw, "beta", "avoidance", float, default=0.5),
        gamma_sonar=_get(raw, "gamma_sonar", "avoidance", float, default=10.0),
    )
    try:
        params.validate()
    except ValueError as e:
        raise ConfigInvalidError(f"avoidance: {e}") from e
    return params


def _parse_sonar(raw: dict) -> SonarGeometry:
    raw = _require_mapping(raw, "sonar")
    _check_known(raw, {"beam_count", "fov_rad", "max_range_m"}, "sonar")
    geom = SonarGeometry(
        beam_count=_get(raw, "beam_count", "sonar", int, default=8),
        fov_rad=_get(raw, "fov_rad", "sonar", float, default=math.pi),
        max_range_m=_get(raw, "max_range_m", "sonar", float, default=10.0),
    )
    try:
        geom.validate()
    except ValueError as e:
        raise ConfigInvalidError(f"sonar: {e}") from e
    return geom


def _parse_nodes(raw_nodes: list, scan: ScanConfig,
                 base_control: ControlParams) -> list[NodeSpec]:
    if not isinstance(raw_nodes, list) or len(raw_nodes) < 2:
        raise ConfigInvalidError("nodes: expected a list of at least two nodes")
    specs: list[NodeSpec] = []
    names: set[str] = set()
    limit = max(0.0, math.pi - scan.theta_interest / 2.0)
    for i, raw in enumerate(raw_nodes):
        path = f"nodes[{i}]"
        raw = _require_mapping(raw, path)
        _check_known(raw, {"name", "role", "pose", "antenna_center_rad",
                           "speed_m_s", "initial_dwell_s", "waypoints",
                           "control"}, path)
        name = _get(raw, "name", path, str, required=True)
        if name in names:
            raise ConfigInvalidError(f"{path}.name: duplicate node name {name!r}")
        names.add(name)
        role = _get(raw, "role", path, str, required=True)
        if role not in ("leader", "follower", "end_user"):
            raise ConfigInvalidError(
                f"{path}.role: must be leader, follower, or end_user")
        px, py, ph = _floats(raw, "pose", path, 3, required=True)
        center = _get(raw, "antenna_center_rad", path, float, default=0.0)
        if abs(center) > limit + 1e-12:
            raise ConfigInvalidError(
                f"{path}.antenna_center_rad: outside servo limit +/-{limit:.6f}")
        waypoints: list[Waypoint] = []
        for j, w in enumerate(_get(raw, "waypoints", path, list, default=[])):
            wpath = f"{path}.waypoints[{j}]"
            w = _require_mapping(w, wpath)
            _check_known(w, {"xy", "dwell_s"}, wpath)
            wx, wy = _floats(w, "xy", wpath, 2, required=True)
            waypoints.append(Waypoint(wx, wy,
                                      _get(w, "dwell_s", wpath, float,
                                           default=0.0)))
        if role == "follower" and waypoints:
            raise ConfigInvalidError(
                f"{path}.waypoints: followers move by tracking, not scripts")
        control = None
        if raw.get("control") is not None:
            control = _parse_control(raw["control"], f"{path}.control",
                                     base=base_control)
        specs.append(NodeSpec(
            name=name, role=role, pose=Pose(px, py, ph),
            antenna_center_rad=center,
            speed_m_s=_get(raw, "speed_m_s", path, float, default=0.2),
            initial_dwell_s=_get(raw, "initial_dwell_s", path, float,
                                 default=0.0),
            waypoints=waypoints, control=control))
    for i, spec in enumerate(specs):
        if spec.role == "follower" and i + 1 >= len(specs):
            raise ConfigInvalidError(
                f"nodes[{i}]: follower needs a successor node to track")
    return specs


def config_from_dict(raw: dict, name_fallback: str = "scenario") -> ScenarioConfig:
    raw = _require_mapping(raw, "<root>")
    _check_known(raw, {"name", "seed", "duration_s", "world", "radio",
                       "antenna", "scan", "control", "avoidance", "sonar",
                       "engine", "nodes"}, "<root>")
    name = _get(raw, "name", "<root>", str, default=name_fallback)
    seed = _get(raw, "seed", "<root>", int, required=True)
    duration = _get(raw, "duration_s", "<root>", float, required=True)
    if duration < 0:
        raise ConfigInvalidError("duration_s: must be >= 0")
    scan = _parse_scan(raw.get("scan", {}))
    control = _parse_control(raw.get("control", {}), "control")
    engine = _require_mapping(raw.get("engine"), "engine")
    _check_known(engine, {"axle_width_m", "collision_radius_m",
                          "intra_scan_leader_motion"}, "engine")
    axle = _get(engine, "axle_width_m", "engine", float, default=0.4)
    radius = _get(engine, "collision_radius_m", "engine", float, default=0.3)
    if axle <= 0 or radius < 0:
        raise ConfigInvalidError("engine: axle_width_m must be > 0 and "
                                 "collision_radius_m >= 0")
    return ScenarioConfig(
        name=name,
        seed=seed,
        duration_s=duration,
        world=_parse_world(raw.get("world", {}), "world"),
        radio=_parse_radio(raw.get("radio", {}), raw.get("antenna", {})),
        scan=scan,
        control=control,
        avoidance=_parse_avoidance(raw.get("avoidance", {})),
        sonar=_parse_sonar(raw.get("sonar", {})),
        nodes=_parse_nodes(raw.get("nodes"), scan, control),
        axle_width_m=axle,
        collision_radius_m=radius,
        intra_scan_leader_motion=_get(engine, "intra_scan_leader_motion",
                                      "engine", bool, default=False),
    )


def load_scenario(path: str) -> ScenarioConfig:
    """Parse and validate a scenario file (or bundled preset name)."""
    p = resolve_scenario(path)
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as e:
        raise ConfigInvalidError(f"{p}: YAML syntax error: {e}") from e
    return config_from_dict(raw, name_fallback=p.stem)


def resolve_scenario(path: str) -> Path:
    p = Path(path)
    if p.is_file():
        return p
    if p.suffix == "" and path in PRESET_NAMES:
        res = importlib.resources.files("relaysim").joinpath(
            "presets", f"{path}.yaml")
        if res.is_file():
            return Path(str(res))
    raise ConfigMissingError(
        f"scenario {path!r} is neither a file nor a bundled preset "
        f"{PRESET_NAMES}")


def config_to_dict(config: ScenarioConfig) -> dict:
    """Inverse of config_from_dict, for round-tripping configs to YAML."""
    obstacles = []
    for s in config.world.obstacles:
        item: dict[str, Any] = {"segment": [s.x1, s.y1, s.x2, s.y2]}
        if s.loss_db is not None:
            item["loss_db"] = s.loss_db
        obstacles.append(item)
    nodes = []
    for spec in config.nodes:
        node: dict[str, Any] = {
            "name": spec.name,
            "role": spec.role,
            "pose": [spec.pose.x, spec.pose.y, spec.pose.heading],
        }
        if spec.antenna_center_rad != 0.0:
            node["antenna_center_rad"] = spec.antenna_center_rad
        if spec.speed_m_s != 0.2:
            node["speed_m_s"] = spec.speed_m_s
        if spec.initial_dwell_s != 0.0:
            node["initial_dwell_s"] = spec.initial_dwell_s
        if spec.waypoints:
            node["waypoints"] = [
                {"xy": [w.x, w.y], "dwell_s": w.dwell_s} for w in spec.waypoints]
        if spec.control is not None:
            node["control"] = {k: getattr(spec.control, k) for k in
                               sorted(_CONTROL_KEYS)}
        nodes.append(node)
    model = config.radio.model
    return {
        "name": config.name,
        "seed": config.seed,
        "duration_s": config.duration_s,
        "world": {
            "bounds": list(config.world.bounds),
            "obstacles": obstacles,
            "annotations": {k: list(v) for k, v in
                            config.world.annotations.items()} or None,
        },
        "radio": {
            "l0_dbm": model.l0_dbm,
            "n": model.n,
            "shadow_sigma_db": model.shadow_sigma_db,
            "multipath_m": model.multipath_m,
            "wall_loss_db": model.wall_loss_db,
            "freq_hz": model.freq_hz,
            "doppler": config.radio.doppler_enabled,
            "link_floor_dbm": config.radio.link_floor_dbm,
            "rate_table": {
                "thresholds_dbm": list(config.radio.rate_table.thresholds_dbm),
                "rates_mbps": list(config.radio.rate_table.rates_mbps),
            },
        },
        "antenna": {
            "gr_db": config.radio.rx_pattern.gr_db,
            "gt_db": config.radio.tx_pattern.gt_db,
        },
        "scan": {
            "theta_interest_rad": config.scan.theta_interest,
            "half_count": config.scan.half_count,
            "scan_rate_rad_s": config.scan.scan_rate,
            "gamma": config.scan.gamma,
        },
        "control": {k: getattr(config.control, k) for k in sorted(_CONTROL_KEYS)},
        "avoidance": {
            "d_crit": config.avoidance.d_crit,
            "threshold_o": config.avoidance.threshold_o,
            "alpha": config.avoidance.alpha,
            "beta": config.avoidance.beta,
            "gamma_sonar": config.avoidance.gamma_sonar,
        },
        "sonar": {
            "beam_count": config.sonar.beam_count,
            "fov_rad": config.sonar.fov_rad,
            "max_range_m": config.sonar.max_range_m,
        },
        "engine": {
            "axle_width_m": config.axle_width_m,
            "collision_radius_m": config.collision_radius_m,
            "intra_scan_leader_motion": config.intra_scan_leader_motion,
        },
        "nodes": nodes,
    }


def write_scenario(config: ScenarioConfig, path: str) -> None:
    raw = config_to_dict(config)
    if raw["world"]["annotations"] is None:
        del raw["world"]["annotations"]
    Path(path).write_text(yaml.safe_dump(raw, sort_keys=False))


# ---------------------------------------------------------------------------
# Running and tracing


def build_simulation(config: ScenarioConfig,
                     seed: Optional[int] = None) -> Simulation:
    nodes = []
    for spec in config.nodes:
        state = RobotState(
            name=spec.name, pose=spec.pose, role=spec.role,
            antenna_center=spec.antenna_center_rad)
        waypoints = list(spec.waypoints)
        if waypoints or spec.initial_dwell_s > 0:
            waypoints = [Waypoint(spec.pose.x, spec.pose.y,
                                  spec.initial_dwell_s)] + waypoints
        nodes.append(NodeSetup(state=state, waypoints=waypoints,
                               speed=spec.speed_m_s, control=spec.control))
    return Simulation(
        world=config.world, nodes=nodes, radio=config.radio,
        scan_config=config.scan, control=config.control,
        avoidance=config.avoidance, sonar=config.sonar,
        seed=config.seed if seed is None else seed,
        axle_width=config.axle_width_m,
        collision_radius=config.collision_radius_m,
        intra_scan_leader_motion=config.intra_scan_leader_motion)


_NODE_FIELDS = ("x", "y", "heading", "mode", "situation", "center_rad",
                "bearing_rad", "true_bearing_rad", "rssi_leader_dbm",
                "rssi_behind_dbm", "vl_mm_s", "vr_mm_s")


def trace_header(node_names: list[str]) -> list[str]:
    cols = ["t"]
    for name in node_names:
        cols.extend(f"{name}_{f}" for f in _NODE_FIELDS)
    cols.extend(["connected", "throughput_mbps"])
    return cols


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def trace_row(sim: Simulation) -> list[str]:
    row = [_fmt(sim.t)]
    for state in sim.nodes:
        follower = state.role == "follower"
        center = state.center_used if state.center_used is not None \
            else state.antenna_center
        row.extend([
            _fmt(state.pose.x),
            _fmt(state.pose.y),
            _fmt(state.pose.heading),
            state.mode.value if follower else "",
            state.situation.value if follower and state.situation else "",
            _fmt(center) if follower else "",
            _fmt(state.bearing_est) if follower else "",
            _fmt(state.true_bearing) if follower else "",
            _fmt(state.rssi_leader) if follower else "",
            _fmt(state.rssi_behind) if follower else "",
            _fmt(state.wheels.v_left) if follower else "",
            _fmt(state.wheels.v_right) if follower else "",
        ])
    row.append(str(sim.chain.connected))
    row.append(_fmt(sim.chain.throughput_mbps))
    return row


def run_scenario(config: ScenarioConfig, out_dir: Optional[str] = None,
                 seed: Optional[int] = None) -> dict:
    """Run a scenario to completion; write trace + summary when out_dir
    is given. Returns the summary dict (with 'trace_rows' attached when
    no files are written)."""
    sim = build_simulation(config, seed=seed)
    used_seed = config.seed if seed is None else seed
    n_ticks = int(math.floor(config.duration_s / sim.dt + 1e-9))
    header = trace_header([n.name for n in sim.nodes])
    rows = [trace_row(sim)]
    for k in range(n_ticks):
        try:
            sim.tick()
        except Exception as e:
            raise SimulationRuntimeError(f"tick {k + 1}: {e}") from e
        rows.append(trace_row(sim))
    summary = summarize_trace(header, rows, config, used_seed)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"{config.name}_seed{used_seed}"
        trace_path = out / f"{stem}_trace.csv"
        with open(trace_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        summary["trace_path"] = str(trace_path)
        summary_path = out / f"{stem}_summary.json"
        summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True))
        summary["summary_path"] = str(summary_path)
    else:
        summary["trace_header"] = header
        summary["trace_rows"] = rows
    return summary


def summarize_trace(header: list[str], rows: list[list[str]],
                    config: ScenarioConfig, seed: int) -> dict:
    """Derive the run summary purely from trace rows."""
    col = {name: i for i, name in enumerate(header)}
    ts = [float(r[col["t"]]) for r in rows]
    thr = [float(r[col["throughput_mbps"]]) for r in rows]
    connected = [r[col["connected"]] == "True" for r in rows]
    first_disconnect = None
    for t, ok in zip(ts, connected):
        if not ok:
            first_disconnect = t
            break
    names = [n.name for n in config.nodes]
    roles = {n.name: n.role for n in config.nodes}
    final = rows[-1]
    final_distance = {}
    bearing_rms = {}
    for i, spec in enumerate(config.nodes):
        if spec.role != "follower":
            continue
        target = names[i + 1]
        dx = float(final[col[f"{target}_x"]]) - float(final[col[f"{spec.name}_x"]])
        dy = float(final[col[f"{target}_y"]]) - float(final[col[f"{spec.name}_y"]])
        final_distance[spec.name] = math.hypot(dx, dy)
        errs = []
        for r in rows:
            est = r[col[f"{spec.name}_bearing_rad"]]
            true = r[col[f"{spec.name}_true_bearing_rad"]]
            if est and true:
                errs.append(float(est) - float(true))
        bearing_rms[spec.name] = (
            math.sqrt(sum(e * e for e in errs) / len(errs)) if errs else None)
    return {
        "name": config.name,
        "seed": seed,
        "backend": _kernels.backend_name(),
        "ticks": len(rows) - 1,
        "duration_s": ts[-1],
        "nodes": [{"name": n, "role": roles[n]} for n in names],
        "connected_fraction": sum(connected) / len(connected),
        "first_disconnect_t": first_disconnect,
        "min_throughput_mbps": min(thr),
        "mean_throughput_mbps": sum(thr) / len(thr),
        "final_throughput_mbps": thr[-1],
        "final_distance_m": final_distance,
        "bearing_rms_rad": bearing_rms,
    }


# ---------------------------------------------------------------------------
# Plot-data export


_EXPORT_KINDS = ("throughput", "bearing", "path", "rssi")


def export_plotdata(trace: str, kind: str, out: Optional[str] = None) -> Path:
    """Reshape a trace CSV into tidy per-series columns."""
    if kind not in _EXPORT_KINDS:
        raise ConfigInvalidError(
            f"unknown export kind {kind!r}, expected one of {_EXPORT_KINDS}")
    trace_path = Path(trace)
    if not trace_path.is_file():
        raise ConfigMissingError(f"trace file {trace!r} not found")
    with open(trace_path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        header = reader.fieldnames or []
    node_names = [c[:-2] for c in header if c.endswith("_x")]
    out_path = Path(out) if out else trace_path.with_name(
        trace_path.stem + f"_{kind}.csv")
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if kind == "throughput":
            writer.writerow(["t", "throughput_mbps"])
            for r in rows:
                writer.writerow([r["t"], r["throughput_mbps"]])
        elif kind == "path":
            writer.writerow(["t", "node", "x", "y"])
            for r in rows:
                for n in node_names:
                    writer.writerow([r["t"], n, r[f"{n}_x"], r[f"{n}_y"]])
        elif kind == "bearing":
            writer.writerow(["t", "node", "bearing_rad", "true_bearing_rad"])
            for r in rows:
                for n in node_names:
                    est = r.get(f"{n}_bearing_rad", "")
                    if est:
                        writer.writerow([r["t"], n, est,
                                         r.get(f"{n}_true_bearing_rad", "")])
        else:
            writer.writerow(["t", "node", "rssi_leader_dbm", "rssi_behind_dbm"])
            for r in rows:
                for n in node_names:
                    rssi = r.get(f"{n}_rssi_leader_dbm", "")
                    if rssi:
                        writer.writerow([r["t"], n, rssi,
                                         r.get(f"{n}_rssi_behind_dbm", "")])
    return out_path


# ---------------------------------------------------------------------------
# Sweeps


def with_relay_count(config: ScenarioConfig, k: int) -> ScenarioConfig:
    """Variant of a chain scenario keeping only the first k followers."""
    followers = [n for n in config.nodes if n.role == "follower"]
    if k < 0 or k > len(followers):
        raise ConfigInvalidError(
            f"relays={k}: scenario has {len(followers)} followers")
    keep = set(f.name for f in followers[:k])
    nodes = [n for n in config.nodes
             if n.role != "follower" or n.name in keep]
    return replace(config, nodes=nodes, name=f"{config.name}_relays{k}")


def _set_config_field(raw: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    cursor = raw
    for part in parts[:-1]:
        nxt = cursor.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            cursor[part] = nxt
        cursor = nxt
    cursor[parts[-1]] = value


def _parse_sweep_value(text: str) -> Any:
    return yaml.safe_load(text)


def sweep_scenario(config: ScenarioConfig, vary: str,
                   out_dir: Optional[str]) -> list[dict]:
    """Run one scenario per value of `--vary field=v1,v2,...`.

    `relays=<counts>` trims the follower roster; any other field is a
    dotted path into the scenario document (e.g. control.kp or seed).
    """
    if "=" not in vary:
        raise ConfigInvalidError("--vary expects field=v1,v2,...")
    fieldname, _, values_text = vary.partition("=")
    values = [v for v in values_text.split(",") if v != ""]
    if not values:
        raise ConfigInvalidError("--vary got an empty value list")
    summaries = []
    for text in values:
        value = _parse_sweep_value(text)
        if fieldname == "relays":
            variant = with_relay_count(config, int(value))
        else:
            raw = config_to_dict(config)
            _set_config_field(raw, fieldname, value)
            variant = config_from_dict(raw, name_fallback=config.name)
            safe = fieldname.replace(".", "-")
            variant = replace(variant, name=f"{config.name}__{safe}-{text}")
        summaries.append(run_scenario(variant, out_dir=out_dir))
    return summaries


# ---------------------------------------------------------------------------
# Self-check battery


def _check_contraction() -> bool:
    es = np.deg2rad(np.arange(-85.0, 86.0, 1.0))
    cfg = ScanConfig()
    for gamma in (1.0, 10.0):
        f = _kernels.error_step_grid(es, cfg.half_count, cfg.pitch, 10.0, gamma)
        for e, fe in zip(es, f):
            if e == 0.0:
                if fe != 0.0:
                    return False
            elif not (np.sign(fe) == -np.sign(e) and abs(fe) < 2 * abs(e)
                      and abs(e + fe) < abs(e)):
                return False
    return True


def _check_pythagorean() -> bool:
    rng = np.random.default_rng(0)
    for _ in range(200):
        v, h, a, b = rng.uniform(-5, 5, size=4)
        par, perp = velocity_components(abs(v), h, a, b)
        if abs(par * par + perp * perp - v * v) > 1e-12 * max(1.0, v * v):
            return False
    return True


def _check_offset_invariance() -> bool:
    rng = np.random.default_rng(1)
    for _ in range(50):
        angles = np.sort(rng.uniform(-1.5, 1.5, size=25))
        rssi = rng.uniform(-80, -20, size=25)
        base = wca_bearing(make_scan_result(angles, rssi, 1.0), 10.0).theta_hat
        for c in (-10.0, 10.0):
            shifted = wca_bearing(make_scan_result(angles, rssi + c, 1.0),
                                  10.0).theta_hat
            if abs(shifted - base) > 1e-12:
                return False
    return True


def _check_determinism() -> bool:
    config = load_scenario("convergence_bench")
    config = replace(config, duration_s=5.0)
    a = run_scenario(config)
    b = run_scenario(config)
    return a["trace_rows"] == b["trace_rows"]


def _check_wheel_sum() -> bool:
    rng = np.random.default_rng(2)
    params = ControlParams(kp=0.5, kd=0.25)
    for _ in range(500):
        # Dyadic rationals make the sum identity exact in IEEE arithmetic.
        v = float(rng.integers(0, 6400)) / 16.0
        th = float(rng.integers(-1024, 1024)) / 1024.0
        prev = float(rng.integers(-1024, 1024)) / 1024.0
        cmd = wheel_velocities(th, prev, v, params)
        if cmd.v_left + cmd.v_right != 2.0 * v:
            return False
    return True


def run_check() -> int:
    checks = [
        ("bearing correction opposes the error with |f| < 2|e|",
         _check_contraction),
        ("velocity components satisfy the Pythagorean identity",
         _check_pythagorean),
        ("uniform RSSI offset leaves the bearing unchanged",
         _check_offset_invariance),
        ("equal seeds reproduce identical traces", _check_determinism),
        ("wheel speeds sum to twice the background speed", _check_wheel_sum),
    ]
    failures = 0
    for label, fn in checks:
        ok = fn()
        print(f"{'PASS' if ok else 'FAIL'}  {label}")
        failures += 0 if ok else 1
    return 0 if failures == 0 else 1


# ---------------------------------------------------------------------------
# CLI


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relaysim",
        description="Leader-follower relay convoy simulator")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("scenario", help="scenario file or preset name")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default="runs")

    p_sweep = sub.add_parser("sweep", help="run a scenario once per value")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--vary", required=True,
                         help="field=v1,v2,... (dotted path or 'relays')")
    p_sweep.add_argument("--out", default="runs")

    p_export = sub.add_parser("export", help="reshape a trace for plotting")
    p_export.add_argument("trace")
    p_export.add_argument("--kind", required=True, choices=_EXPORT_KINDS)
    p_export.add_argument("--out", default=None)

    sub.add_parser("check", help="run the quick invariant battery")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            config = load_scenario(args.scenario)
            summary = run_scenario(config, out_dir=args.out, seed=args.seed)
            print(json.dumps(
                {k: v for k, v in summary.items()
                 if k not in ("trace_rows", "trace_header")},
                indent=2, sort_keys=True))
            return 0
        if args.verb == "sweep":
            config = load_scenario(args.scenario)
            for summary in sweep_scenario(config, args.vary, args.out):
                print(f"{summary['name']}: "
                      f"connected_fraction={summary['connected_fraction']:.3f} "
                      f"final_throughput={summary['final_throughput_mbps']}")
            return 0
        if args.verb == "export":
            out = export_plotdata(args.trace, args.kind, args.out)
            print(out)
            return 0
        if args.verb == "check":
            return run_check()
    except ConfigMissingError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigInvalidError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except SimulationRuntimeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    raise AssertionError("unreachable verb")


if __name__ == "__main__":
    sys.exit(main())
