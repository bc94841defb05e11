"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

Low-level layer: embodiment profiles, clearance tests, local A* paths and a
pure-pursuit waypoint follower.
"""

import math
from dataclasses import dataclass

import numpy as np

from roomnav import grid_utils
from roomnav.grid_utils import FREE, OCCUPIED
from roomnav.gridworld import normalize_angle


@dataclass(frozen=True)
class EmbodimentProfile:
    id: str
    v_max: float
    w_max: float
    radius: float
    sensor_range: float

    def __post_init__(self):
        for name in ("v_max", "w_max", "radius", "sensor_range"):
            if not getattr(self, name) > 0:
                raise ValueError(f"Profile {self.id}: {name} must be positive")

    @classmethod
    def from_config(cls, config, name):
        try:
            p = config["profiles"][name]
        except KeyError:
            raise ValueError(
                f"Unknown profile {name!r}: choose from {', '.join(config['profiles'])}"
            ) from None
        return cls(name, p["v_max"], p["w_max"], p["radius"], p["sensor_range"])


PRESETS = {
    "wheeled": EmbodimentProfile("wheeled", 1.0, 2.0, 0.30, 6.0),
    "quadruped": EmbodimentProfile("quadruped", 1.2, 2.5, 0.35, 6.0),
    "humanoid": EmbodimentProfile("humanoid", 0.6, 1.5, 0.30, 6.0),
}


class _Signal:
    """Falsy marker result."""

    def __init__(self, name):
        self.name = name

    def __bool__(self):
        return False

    def __repr__(self):
        return self.name


#: `plan_local_path` could not reach the waypoint
PATH_NOT_FOUND = _Signal("PATH_NOT_FOUND")
#: `follow` detected that the path is no longer valid
REPLAN = _Signal("REPLAN")


class LocalPath(list):
    """Cell sequence from the robot cell to the waypoint (may be empty).

    An empty path is still a valid result (waypoint == current cell).
    """

    def __bool__(self):
        return True


def clearance_cells(profile, resolution, margin=0.0):
    return (profile.radius + margin) / resolution


def traversable_grid(belief, profile, resolution, margin=0.0):
    """Boolean grid of cells whose clearance disk is Free in belief."""
    return grid_utils.inflate(belief != FREE, clearance_cells(profile, resolution, margin))


def traversable(belief, cell, profile, resolution, margin=0.0):
    """True iff every cell within the profile radius of `cell` is Free.

    Unknown counts as blocked.
    """
    h, w = belief.shape
    x, y = cell
    st = grid_utils.clearance_structure(clearance_cells(profile, resolution, margin))
    r = st.shape[0] // 2
    for dy, dx in zip(*np.nonzero(st)):
        cx, cy = x + dx - r, y + dy - r
        if not (0 <= cx < w and 0 <= cy < h) or belief[cy, cx] != FREE:
            return False
    return True


def plan_local_path(belief, pose, waypoint, profile, resolution, *, margin=0.0, trav=None):
    """Optimal 8-connected path on the inflated belief.

    Args:
        pose: (x, y, ...) meters
        waypoint: (x, y) cell
        trav (np.ndarray[bool]): precomputed `traversable_grid`
    Returns:
        LocalPath or PATH_NOT_FOUND
    """
    start = (int(math.floor(pose[0] / resolution)), int(math.floor(pose[1] / resolution)))
    goal = (int(waypoint[0]), int(waypoint[1]))
    if start == goal:
        return LocalPath()
    if trav is None:
        trav = traversable_grid(belief, profile, resolution, margin)
    cells = grid_utils.astar(trav, start, goal)
    if cells is None:
        return PATH_NOT_FOUND
    return LocalPath(cells)


def follow(path, state, profile, resolution, *, belief=None, params=None, dt=0.1):
    """Pure-pursuit command for `path`.

    Args:
        path (list): cells, starting at the robot cell
        state (AgentState):
        belief (np.ndarray): if given, a path cell that became Occupied
            triggers REPLAN
        params (dict): `rotate_threshold` (deg), `gain`, `lookahead` (m)
    Returns:
        (v, w) or REPLAN
    """
    params = params or {}
    rotate_threshold = math.radians(params.get("rotate_threshold", 60.0))
    gain = params.get("gain", 2.0)
    lookahead = params.get("lookahead", 0.3)

    if belief is not None:
        for x, y in path:
            if belief[y, x] == OCCUPIED:
                return REPLAN
    if not path:
        return (0.0, 0.0)

    centers = [((x + 0.5) * resolution, (y + 0.5) * resolution) for x, y in path]
    # Closest path point, then the first point at lookahead distance beyond it
    dists = [math.hypot(cx - state.x, cy - state.y) for cx, cy in centers]
    i0 = int(np.argmin(dists))
    target = centers[-1]
    for cx, cy in centers[i0:]:
        if math.hypot(cx - state.x, cy - state.y) >= lookahead:
            target = (cx, cy)
            break
    remaining = math.hypot(centers[-1][0] - state.x, centers[-1][1] - state.y)
    if remaining < 0.25 * resolution:
        return (0.0, 0.0)

    dx = target[0] - state.x
    dy = target[1] - state.y
    err = normalize_angle(math.atan2(dy, dx) - state.theta)
    if abs(err) > rotate_threshold:
        return (0.0, math.copysign(profile.w_max, err))

    w = max(-profile.w_max, min(profile.w_max, gain * err))
    v = profile.v_max
    ld = math.hypot(dx, dy)
    curvature = 2.0 * math.sin(abs(err)) / max(ld, 1e-6)
    if curvature > 1e-9:
        v = min(v, profile.w_max / curvature)
    # Do not overshoot the final cell
    v = min(v, remaining / dt)
    return (v, w)
