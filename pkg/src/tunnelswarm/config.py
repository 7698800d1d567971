"""Configuration: documented defaults, JSON loading, deep merge, and
dotted-path access for parameter sweeps.

A config is a plain nested dict mirroring the parameter groups. Everything
here is schema-level; range validation happens when the resolved dict is
turned into typed trial parameters.
"""

from __future__ import annotations

import copy
import json


class ConfigError(ValueError):
    """Malformed or out-of-range configuration input."""


DEFAULTS: dict = {
    "mode": "baseline",
    "seed": 0,
    "duration_s": 1800.0,
    "n_active": 3,
    "n_faulty": 1,
    "map": {
        "omega_r": 0.9,
        "omega_w": 0.9,
        "weight": 1.0,
        "beta": 0.05,
        "decay_interval_s": 5.0,
        "window_bins": 4,
        "bin_width_cm": 10.0,
    },
    "controller": {
        "p_r": 0.64,
        "delta_r": 0.1,
        "t_give_up": 60.0,
        "t_rest": 30.0,
        "invert_reversal": False,
    },
    "sensing": {
        # omega_r / omega_w default to the map section's values (a calibrated
        # robot); set them here explicitly to model miscalibration
        "omega_r": None,
        "omega_w": None,
        "sigma_loc": 5.0,
        "dig_zone_range": 15.0,
    },
    "tunnel": {
        "length": 300.0,
        "width": 70.0,
        "home_x": 40.0,
        "dig_x": 260.0,
    },
    "world": {
        "mu": 0.4,
        "kappa": 0.025,
        "n_iter": 8,
        "eps_pen": 0.1,
        "dt": 0.05,
        "v_max": 10.0,
        "omega_max": 1.5,
    },
    "faulty": {
        "x": 150.0,
        "y": 35.0,
        "theta_deg": 90.0,
    },
    # realization constants the source experiments never published; grouped
    # so sensitivity sweeps can address them uniformly
    "assumptions": {
        "t_dig_s": 30.0,
        "body_seg_half": 7.0,
        "body_radius": 9.0,
        # cruise below the actuator cap: the modeled robots lose headway to
        # gait and steering overhead, and the trip-time budget expects it
        "v_cruise_cm_s": 8.0,
        "lookahead_cm": 25.0,
        "arc_floor": 0.2,
        "rest_slots": [[20.0, 16.0], [46.0, 35.0], [20.0, 54.0]],
        "dig_slot_ys": [16.0, 35.0, 54.0],
        "backup_dist": 10.0,
        "backup_speed": 5.0,
        "turn_jitter_deg": 20.0,
        "push_burst_s": 3.0,
        "push_progress_cm": 2.0,
        "push_max_s": 25.0,
        "probe_dist": 50.0,
        "heading_gain": 2.0,
        "engage_r_c": 0.7,
        "engage_min_x": 80.0,
        "goal_tol": 2.0,
        "trajectory_sample_s": 1.0,
        "map_snapshot_every_s": 0.0,
        "obstruction_w_position": 0.5,
        "obstruction_w_angle": 0.5,
    },
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def _merge_into(base: dict, override: dict, path: str = "") -> None:
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {here!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {here!r} must be an object")
            _merge_into(base[key], value, here)
        else:
            base[key] = value


def apply_overrides(overrides: dict) -> dict:
    """Defaults with a (possibly partial) override dict merged in.

    Unknown keys are rejected rather than ignored so typos fail loudly.
    """
    cfg = default_config()
    _merge_into(cfg, overrides)
    return cfg


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return apply_overrides(data)


def set_path(cfg: dict, dotted: str, value) -> None:
    """Set one value by dotted path, e.g. 'faulty.x' or 'map.beta'."""
    parts = dotted.split(".")
    node = cfg
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"config path {dotted!r} does not resolve")
        node = node[part]
    leaf = parts[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigError(f"config path {dotted!r} does not resolve")
    if isinstance(node[leaf], dict):
        raise ConfigError(f"config path {dotted!r} names a section, not a value")
    node[leaf] = value


def get_path(cfg: dict, dotted: str):
    node = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"config path {dotted!r} does not resolve")
        node = node[part]
    return node
