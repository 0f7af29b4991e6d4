"""Scenario configuration: JSON tree, strict schema, defaults, validation.

Unknown keys are rejected (with a nearest-key suggestion) and every bound is
checked with the full key path in the error message, so attack and sensor
parameters cannot be silently mistyped.  All values are seconds, meters, and
radians; the latency report is the only place milliseconds appear.
"""

from __future__ import annotations

import copy
import difflib
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .attack import MODE_MEACONING, MODE_OFF, AttackSpec
from .cameras import CameraModel
from .gnss import GnssConfig, default_gnss_config, position_observation
from .latency import LatencyBudget, LatencyComponent
from .lifting import DetectorConfig
from .mission import WaypointPlan
from .plant import DynamicsModel, double_integrator


class ConfigError(ValueError):
    """Schema violation or unreadable scenario file."""


DEFAULT_CONFIG: dict[str, Any] = {
    "seed": 1,
    "duration_s": 40.0,
    "dt_s": 0.01,
    "plant": {
        "accel_noise_std_mps2": 0.01,
        "initial_position_m": [0.0, 0.0, 5.0],
        "initial_velocity_mps": [0.0, 0.0, 0.0],
    },
    "mission": {
        "waypoints": [
            {"position_m": [0.0, 0.0, 5.0], "time_s": 0.0},
            {"position_m": [16.0, 0.0, 5.0], "time_s": 10.0},
            {"position_m": [16.0, 16.0, 5.0], "time_s": 20.0},
            {"position_m": [0.0, 16.0, 5.0], "time_s": 30.0},
            {"position_m": [0.0, 0.0, 5.0], "time_s": 40.0},
        ],
        "loop": True,
    },
    "controller": {"kp": 9.0, "kd": 6.0, "a_max_mps2": 6.0},
    "gnss": {
        "rate_hz": 10.0,
        "noise_cov_diag_m2": [0.25, 0.25, 0.64],
        "bias_m": [0.0, 0.0, 0.0],
        "latency": {
            "components": [
                {"name": "mocap", "mean_s": 6.02e-3, "std_s": 0.88e-3},
                {"name": "sim_processing", "mean_s": 16.01e-3, "std_s": 4.45e-3},
                {"name": "network", "mean_s": 4.62e-3, "std_s": 0.98e-3},
            ],
            "pad_s": 0.073,
            "target_end_to_end_s": 0.100,
        },
    },
    "cameras": {
        "rate_hz": 5.0,
        "bearing_noise_rad": 0.005,
        "miss_probability": 0.05,
        "positions_m": [
            [-5.0, -5.0, 10.0],
            [21.0, -5.0, 10.0],
            [21.0, 21.0, 10.0],
            [-5.0, 21.0, 10.0],
        ],
        "latency": {
            "components": [
                {"name": "processing", "mean_s": 20.0e-3, "std_s": 5.0e-3},
                {"name": "network", "mean_s": 4.62e-3, "std_s": 0.98e-3},
            ],
            "pad_s": 0.0,
            "target_end_to_end_s": None,
        },
    },
    "tracker": {
        "num_particles": 3000,
        "init_box_half_extent_m": [3.0, 3.0, 3.0],
        "init_velocity_std_mps": 1.0,
        "jitter_accel_std_mps2": 3.0,
        "cov_inflation": 2.0,
        "cov_floor_std_m": 0.1,
    },
    "monitor": {"alpha": 1.0e-7, "buffer_steps": 64},
    "attack": {
        "mode": "off",
        "t_on_s": 10.0,
        "direction": [1.0, 0.0, 0.0],
        "ramp_rate_mps": 0.02,
        "margin": 0.1,
        "iters": 16,
        "r_max_mps": 0.2,
    },
    "detector": {
        "enabled": True,
        "window_steps": 100,
        "slide_steps": 50,
        "alpha": 0.01,
        "persistence": 3,
    },
    "mitigation": {"enabled": False, "gnss_r_inflation": 1.0},
}


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _check_keys(d: dict, allowed, path: str):
    if not isinstance(d, dict):
        _fail(path or "<root>", f"expected an object, got {type(d).__name__}")
    for key in d:
        if key not in allowed:
            hint = difflib.get_close_matches(key, allowed, n=1)
            extra = f" (did you mean {hint[0]!r}?)" if hint else ""
            _fail(f"{path}{key}", f"unknown key{extra}")


def _merge(default, override, path=""):
    """Deep-merge override into default, rejecting unknown keys."""
    if isinstance(default, dict):
        _check_keys(override, default.keys(), path)
        out = {}
        for key, dval in default.items():
            if key in override:
                # Lists (waypoints, camera positions, latency components)
                # replace wholesale rather than merging elementwise.
                if isinstance(dval, dict):
                    out[key] = _merge(dval, override[key], f"{path}{key}.")
                else:
                    out[key] = copy.deepcopy(override[key])
            else:
                out[key] = copy.deepcopy(dval)
        return out
    return copy.deepcopy(override)


def _num(d, key, path, lo=None, hi=None, lo_strict=None):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(f"{path}{key}", f"expected a number, got {v!r}")
    v = float(v)
    if lo is not None and v < lo:
        _fail(f"{path}{key}", f"must be >= {lo}, got {v}")
    if lo_strict is not None and v <= lo_strict:
        _fail(f"{path}{key}", f"must be > {lo_strict}, got {v}")
    if hi is not None and v > hi:
        _fail(f"{path}{key}", f"must be <= {hi}, got {v}")
    return v


def _integer(d, key, path, lo=None):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(f"{path}{key}", f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        _fail(f"{path}{key}", f"must be >= {lo}, got {v}")
    return v


def _boolean(d, key, path):
    v = d[key]
    if not isinstance(v, bool):
        _fail(f"{path}{key}", f"expected a boolean, got {v!r}")
    return v


def _vec3(d, key, path):
    v = d[key]
    if (not isinstance(v, (list, tuple)) or len(v) != 3
            or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v)):
        _fail(f"{path}{key}", f"expected a 3-vector of numbers, got {v!r}")
    return np.asarray(v, dtype=float)


def _latency_budget(d: dict, path: str) -> LatencyBudget:
    _check_keys(d, ("components", "pad_s", "target_end_to_end_s"), path)
    comps = d["components"]
    if not isinstance(comps, list) or not comps:
        _fail(f"{path}components", "expected a nonempty list")
    parsed = []
    for i, c in enumerate(comps):
        cpath = f"{path}components[{i}]."
        _check_keys(c, ("name", "mean_s", "std_s"), cpath)
        if not isinstance(c.get("name"), str):
            _fail(f"{cpath}name", "expected a string")
        mean = _num(c, "mean_s", cpath, lo_strict=0.0)
        std = _num(c, "std_s", cpath, lo=0.0)
        parsed.append(LatencyComponent(c["name"], mean, std))
    pad = _num(d, "pad_s", path, lo=0.0)
    target = d["target_end_to_end_s"]
    if target is not None:
        if isinstance(target, bool) or not isinstance(target, (int, float)):
            _fail(f"{path}target_end_to_end_s", "expected a number or null")
        target = float(target)
    return LatencyBudget(tuple(parsed), pad=pad, target_end_to_end=target)


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario; `raw` is the fully-resolved JSON-compatible tree."""

    raw: dict = field(repr=False)
    seed: int
    duration: float
    dt: float
    accel_noise_std: float
    initial_position: np.ndarray
    initial_velocity: np.ndarray
    plan: WaypointPlan
    kp: float
    kd: float
    a_max: float
    gnss: GnssConfig
    gnss_budget: LatencyBudget
    cameras: tuple[CameraModel, ...]
    camera_rate: float
    camera_budget: LatencyBudget
    num_particles: int
    init_box_half_extent: np.ndarray
    init_velocity_std: float
    jitter_accel_std: float
    cov_inflation: float
    cov_floor_std: float
    monitor_alpha: float
    buffer_steps: int
    attack: AttackSpec
    attack_auto: bool
    attack_margin: float
    attack_iters: int
    detector_enabled: bool
    detector: DetectorConfig
    mitigation: bool
    gnss_r_inflation: float

    def dynamics_model(self) -> DynamicsModel:
        return double_integrator(self.dt, self.accel_noise_std)

    def tracker_model(self) -> DynamicsModel:
        return double_integrator(1.0 / self.camera_rate, self.jitter_accel_std)

    def with_overrides(self, **tree) -> "ScenarioConfig":
        """New config with raw-tree overrides re-validated."""
        return parse_config(_merge(self.raw, tree))

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return self.with_overrides(seed=int(seed))

    def for_calibration(self, ramp_rate: float) -> "ScenarioConfig":
        """Probe scenario for stealth calibration: attack on at the given
        rate, mitigation and offboard detector off, same seed."""
        return self.with_overrides(
            attack={"mode": "meaconing", "ramp_rate_mps": float(ramp_rate)},
            detector={"enabled": False},
            mitigation={"enabled": False},
        )


def parse_config(tree: dict) -> ScenarioConfig:
    """Validate a raw JSON tree (defaults already applied via load_config)."""
    resolved = _merge(DEFAULT_CONFIG, tree)
    path = ""

    seed = _integer(resolved, "seed", path, lo=0)
    duration = _num(resolved, "duration_s", path, lo=0.0)
    dt = _num(resolved, "dt_s", path, lo_strict=0.0)

    p = resolved["plant"]
    ppath = "plant."
    accel_noise = _num(p, "accel_noise_std_mps2", ppath, lo=0.0)
    init_pos = _vec3(p, "initial_position_m", ppath)
    init_vel = _vec3(p, "initial_velocity_mps", ppath)

    m = resolved["mission"]
    mpath = "mission."
    wps = m["waypoints"]
    if not isinstance(wps, list) or len(wps) < 2:
        _fail("mission.waypoints", "need at least 2 waypoints")
    positions, times = [], []
    for i, wp in enumerate(wps):
        wpath = f"mission.waypoints[{i}]."
        _check_keys(wp, ("position_m", "time_s"), wpath)
        positions.append(_vec3(wp, "position_m", wpath))
        times.append(_num(wp, "time_s", wpath, lo=0.0))
    if not all(b > a for a, b in zip(times, times[1:])):
        _fail("mission.waypoints", "arrival times must be strictly increasing")
    plan = WaypointPlan(np.array(positions), np.array(times),
                        loop=_boolean(m, "loop", mpath))

    c = resolved["controller"]
    cpath = "controller."
    kp = _num(c, "kp", cpath, lo_strict=0.0)
    kd = _num(c, "kd", cpath, lo_strict=0.0)
    a_max = _num(c, "a_max_mps2", cpath, lo_strict=0.0)

    g = resolved["gnss"]
    gpath = "gnss."
    rate = _num(g, "rate_hz", gpath, lo_strict=0.0)
    r_diag = g["noise_cov_diag_m2"]
    if (not isinstance(r_diag, list) or len(r_diag) != 3
            or any(not isinstance(x, (int, float)) or isinstance(x, bool) or x <= 0
                   for x in r_diag)):
        _fail("gnss.noise_cov_diag_m2", "expected 3 positive numbers")
    gnss_cfg = default_gnss_config(rate=rate, r_diag=tuple(float(x) for x in r_diag),
                                   bias=_vec3(g, "bias_m", gpath))
    gnss_budget = _latency_budget(g["latency"], "gnss.latency.")

    cam = resolved["cameras"]
    campath = "cameras."
    cam_rate = _num(cam, "rate_hz", campath, lo_strict=0.0)
    sigma_b = _num(cam, "bearing_noise_rad", campath, lo_strict=0.0)
    p_miss = _num(cam, "miss_probability", campath, lo=0.0)
    if p_miss >= 1.0:
        _fail("cameras.miss_probability", "must be < 1")
    cam_positions = cam["positions_m"]
    if not isinstance(cam_positions, list):
        _fail("cameras.positions_m", "expected a list of 3-vectors")
    camera_budget = _latency_budget(cam["latency"], "cameras.latency.")
    cameras = tuple(
        CameraModel(id=i, position=_vec3({"p": cp}, "p", f"cameras.positions_m[{i}]:"),
                    bearing_noise=sigma_b, rate=cam_rate, p_miss=p_miss,
                    latency=camera_budget)
        for i, cp in enumerate(cam_positions)
    )

    tr = resolved["tracker"]
    tpath = "tracker."
    n_particles = _integer(tr, "num_particles", tpath, lo=1)
    half_extent = _vec3(tr, "init_box_half_extent_m", tpath)
    if np.any(half_extent < 0):
        _fail("tracker.init_box_half_extent_m", "must be nonnegative")
    init_vstd = _num(tr, "init_velocity_std_mps", tpath, lo=0.0)
    jitter = _num(tr, "jitter_accel_std_mps2", tpath, lo=0.0)
    inflation = _num(tr, "cov_inflation", tpath, lo=1.0)
    floor_std = _num(tr, "cov_floor_std_m", tpath, lo=0.0)

    mon = resolved["monitor"]
    monpath = "monitor."
    alpha = _num(mon, "alpha", monpath, lo_strict=0.0)
    if alpha >= 1.0:
        _fail("monitor.alpha", "must be < 1")
    buffer_steps = _integer(mon, "buffer_steps", monpath, lo=2)

    a = resolved["attack"]
    apath = "attack."
    mode = a["mode"]
    if mode not in (MODE_OFF, MODE_MEACONING):
        _fail("attack.mode", f"expected 'off' or 'meaconing', got {mode!r}")
    t_on = _num(a, "t_on_s", apath, lo=0.0)
    direction = _vec3(a, "direction", apath)
    norm = float(np.linalg.norm(direction))
    if abs(norm - 1.0) > 1e-6:
        _fail("attack.direction", f"must be a unit vector (norm = {norm:.6g})")
    direction = direction / norm
    ramp = a["ramp_rate_mps"]
    attack_auto = isinstance(ramp, str)
    if attack_auto:
        if ramp != "auto":
            _fail("attack.ramp_rate_mps", f"expected a number or 'auto', got {ramp!r}")
        ramp_rate = 0.0
    else:
        ramp_rate = _num(a, "ramp_rate_mps", apath, lo=0.0)
    margin = _num(a, "margin", apath, lo_strict=0.0)
    if margin >= 1.0:
        _fail("attack.margin", "must be < 1")
    iters = _integer(a, "iters", apath, lo=1)
    r_max = _num(a, "r_max_mps", apath, lo_strict=0.0)
    attack = AttackSpec(mode=mode, t_on=t_on, direction=direction,
                        ramp_rate=ramp_rate, r_max=r_max)

    det = resolved["detector"]
    dpath = "detector."
    det_enabled = _boolean(det, "enabled", dpath)
    detector = DetectorConfig(
        window_steps=_integer(det, "window_steps", dpath, lo=2),
        slide_steps=_integer(det, "slide_steps", dpath, lo=1),
        alpha=_num(det, "alpha", dpath, lo_strict=0.0),
        persistence=_integer(det, "persistence", dpath, lo=1),
    )
    if detector.alpha >= 1.0:
        _fail("detector.alpha", "must be < 1")

    mit = resolved["mitigation"]
    mitpath = "mitigation."
    mitigation = _boolean(mit, "enabled", mitpath)
    r_infl = _num(mit, "gnss_r_inflation", mitpath, lo=1.0)

    return ScenarioConfig(
        raw=resolved, seed=seed, duration=duration, dt=dt,
        accel_noise_std=accel_noise, initial_position=init_pos,
        initial_velocity=init_vel, plan=plan, kp=kp, kd=kd, a_max=a_max,
        gnss=gnss_cfg, gnss_budget=gnss_budget, cameras=cameras,
        camera_rate=cam_rate, camera_budget=camera_budget,
        num_particles=n_particles, init_box_half_extent=half_extent,
        init_velocity_std=init_vstd, jitter_accel_std=jitter,
        cov_inflation=inflation, cov_floor_std=floor_std,
        monitor_alpha=alpha, buffer_steps=buffer_steps, attack=attack,
        attack_auto=attack_auto, attack_margin=margin, attack_iters=iters,
        detector_enabled=det_enabled, detector=detector,
        mitigation=mitigation, gnss_r_inflation=r_infl,
    )


def load_config(path: str) -> ScenarioConfig:
    """Parse and validate a scenario file; defaults fill missing keys."""
    try:
        with open(path) as fh:
            tree = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}")
    if not isinstance(tree, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(tree)


def default_config(**overrides) -> ScenarioConfig:
    return parse_config(overrides)
