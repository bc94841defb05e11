"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

Built-in defaults and YAML configuration loading.
"""

import copy
import math
import os

import yaml

from roomnav.util import write

CONFIG_FILE_NAME = "pyroomnav.yaml"

#: Maximum number of parent folders searched for `pyroomnav.yaml`
MAX_CONFIG_LEVELS = 15

DEFAULT_CONFIG = {
    "world": {
        # Meters per cell
        "resolution": 0.1,
        # Simulation tick (seconds)
        "dt": 0.1,
        # Sense/plan every `sense_period` seconds
        "sense_period": 0.5,
        # Success distance (meters)
        "success_distance": 1.0,
        # Per-detection false-negative rate
        "p_fn": 0.0,
        "confidence_min": 0.7,
        "confidence_max": 1.0,
    },
    "scene": {
        "d_cover": 3.0,
        # Viewpoint admission threshold (novel cells)
        "viewpoint_eps": 25,
        # Cells; None: ceil(0.5 m / resolution)
        "dilation_radius": None,
        "door_width_max": 1.2,
        # Square meters
        "min_room_area": 1.0,
        "merge_distance": 0.5,
    },
    "planner": {
        # Minimum coverage score (cells)
        "delta": 3,
        # TSP restarts
        "restarts": 8,
        # Rolling window side (meters)
        "window": 8.0,
        # Candidate lattice spacing (meters); None: d_cover / 2
        "spacing": None,
        # Lattice jitter (cells)
        "jitter": 0.2,
    },
    "policy": {
        # What to do when no uncovered room is left: 'resweep' or 'stop'
        "exhausted": "resweep",
        # Approach distance as fraction of success_distance
        "approach_factor": 0.5,
        # Frontier targets lie within this distance of the frontier (meters)
        "frontier_reach": 1.0,
        # Seconds without progress before a waypoint is given up
        "stuck_timeout": 5.0,
    },
    "autonomy": {
        # Degrees
        "rotate_threshold": 60.0,
        "gain": 2.0,
        # Meters added to the profile radius for planning
        "clearance_margin": 0.1,
        # Pure pursuit lookahead (meters)
        "lookahead": 0.3,
    },
    "profiles": {
        "wheeled": {"v_max": 1.0, "w_max": 2.0, "radius": 0.30, "sensor_range": 6.0},
        "quadruped": {
            "v_max": 1.2,
            "w_max": 2.5,
            "radius": 0.35,
            "sensor_range": 6.0,
        },
        "humanoid": {"v_max": 0.6, "w_max": 1.5, "radius": 0.30, "sensor_range": 6.0},
    },
    "reasoner": {
        # 'oracle' or 'remote'
        "kind": "oracle",
        # Path to a priors JSON file; None: bundled default
        "priors": None,
        "early_stop_margin": 0.1,
        "attribute_error_rate": 0.0,
        "room_confusion": 0.0,
        # Remote endpoint; None: PYROOMNAV_REASONER_URL
        "url": None,
        "timeout": 10.0,
        # Skip credential lookups for the remote endpoint
        "no_keyring": False,
        "no_netrc": False,
    },
    "bench": {
        "profile": "wheeled",
        "seed": 0,
        "parallel": 1,
        "timeout_scale": 1.0,
    },
}

#: Sections whose keys are free-form (user-defined profiles)
OPEN_SECTIONS = {"profiles"}


class ConfigError(ValueError):
    """Raised when a configuration file contains unknown or invalid entries."""


def default_config():
    """Return a deep copy of the built-in defaults."""
    return copy.deepcopy(DEFAULT_CONFIG)


def merge_config(base, override, *, source="<dict>"):
    """Return a copy of `base` updated with `override`, rejecting unknown keys."""
    res = copy.deepcopy(base)
    if not override:
        return res
    if not isinstance(override, dict):
        raise ConfigError(f"{source}: expected a mapping at top level")
    for section, values in override.items():
        if section not in res:
            raise ConfigError(f"{source}: unknown section `{section}`")
        if values is None:
            continue
        if not isinstance(values, dict):
            raise ConfigError(f"{source}: `{section}` must be a mapping")
        if section in OPEN_SECTIONS:
            for name, entry in values.items():
                prev = res[section].get(name, {})
                merged = dict(prev)
                merged.update(entry or {})
                res[section][name] = merged
            continue
        for key, val in values.items():
            if key not in res[section]:
                raise ConfigError(f"{source}: unknown entry `{section}.{key}`")
            res[section][key] = val
    return res


def find_config_file(start_folder=None):
    """Look for `pyroomnav.yaml` in `start_folder` and its parents.

    Returns:
        path or None
    """
    cur_folder = os.path.abspath(start_folder or os.getcwd())
    for _level in range(MAX_CONFIG_LEVELS):
        path = os.path.join(cur_folder, CONFIG_FILE_NAME)
        if os.path.isfile(path):
            return path
        parent = os.path.dirname(cur_folder)
        if parent == cur_folder:
            break
        cur_folder = parent
    return None


def load_config(path=None):
    """Return the effective configuration dict.

    Args:
        path (str): YAML file. If None, built-in defaults are returned.
    """
    config = default_config()
    if path:
        try:
            with open(path, encoding="utf-8-sig") as f:
                data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"Error parsing {path}: {e}") from e
        config = merge_config(config, data, source=path)
        write(f"Using configuration from {path}", debug=True)
    validate_config(config)
    return config


def validate_config(config):
    world = config["world"]
    if world["resolution"] <= 0 or world["dt"] <= 0:
        raise ConfigError("world.resolution and world.dt must be positive")
    if world["sense_period"] < world["dt"]:
        raise ConfigError("world.sense_period must be >= world.dt")
    if not 0 <= world["p_fn"] <= 1:
        raise ConfigError("world.p_fn must be in [0, 1]")
    if config["planner"]["delta"] < 1:
        raise ConfigError("planner.delta must be >= 1")
    if config["planner"]["restarts"] < 1:
        raise ConfigError("planner.restarts must be >= 1")
    if config["policy"]["exhausted"] not in ("resweep", "stop"):
        raise ConfigError("policy.exhausted must be 'resweep' or 'stop'")
    if config["reasoner"]["kind"] not in ("oracle", "remote"):
        raise ConfigError("reasoner.kind must be 'oracle' or 'remote'")
    for name, prof in config["profiles"].items():
        for key in ("v_max", "w_max", "radius", "sensor_range"):
            if not prof.get(key, 0) > 0:
                raise ConfigError(f"profiles.{name}.{key} must be positive")


def dilation_radius_cells(config):
    """Return the room segmentation dilation radius in cells."""
    r = config["scene"]["dilation_radius"]
    if r is None:
        r = math.ceil(0.5 / config["world"]["resolution"] - 1e-9)
    return int(r)


def planner_spacing(config):
    """Return the candidate lattice spacing in meters."""
    spacing = config["planner"]["spacing"]
    if spacing is None:
        spacing = config["scene"]["d_cover"] / 2.0
    return spacing
