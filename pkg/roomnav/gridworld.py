"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

Deterministic 2D simulation substrate: ground-truth maps, objects, sensing,
kinematics and the success / shortest-path oracles used for evaluation.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from roomnav import grid_utils
from roomnav.grid_utils import FREE, OCCUPIED

#: Result of `shortest_path_len` when no satisfying instance can be reached
INFEASIBLE = math.inf

#: Geometric relation parameters used when nothing else is configured
DEFAULT_RELATION_RULES = {
    "near": {"max_distance": 1.5},
    "on": {"margin": 2},
}

#: Relation predicate that is not configured
UNSUPPORTED = "unsupported"


# ===============================================================================
# Goal
# ===============================================================================
@dataclass(frozen=True)
class AttrEq:
    name: str
    value: str

    kind = "attr"

    def to_dict(self):
        return {"type": self.kind, "name": self.name, "value": self.value}


@dataclass(frozen=True)
class Relation:
    rel: str
    other: str

    kind = "relation"

    def to_dict(self):
        return {"type": self.kind, "relation": self.rel, "category": self.other}


@dataclass(frozen=True)
class InRoom:
    room: str

    kind = "in_room"

    def to_dict(self):
        return {"type": self.kind, "room": self.room}


def constraint_from_dict(d):
    kind = d.get("type")
    if kind == "attr":
        return AttrEq(d["name"], d["value"])
    elif kind == "relation":
        return Relation(d["relation"], d["category"])
    elif kind == "in_room":
        return InRoom(d["room"])
    raise ValueError(f"Unknown constraint type {kind!r}")


@dataclass(frozen=True)
class Goal:
    """Target category plus a (possibly empty) tuple of constraints."""

    category: str
    constraints: tuple = ()

    @property
    def attr_constraints(self):
        return [c for c in self.constraints if isinstance(c, AttrEq)]

    @property
    def relation_constraints(self):
        return [c for c in self.constraints if isinstance(c, Relation)]

    @property
    def room_constraints(self):
        return [c for c in self.constraints if isinstance(c, InRoom)]

    def to_dict(self):
        return {
            "category": self.category,
            "constraints": [c.to_dict() for c in self.constraints],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["category"],
            tuple(constraint_from_dict(c) for c in d.get("constraints", [])),
        )

    def __str__(self):
        parts = [self.category]
        for c in self.constraints:
            if isinstance(c, AttrEq):
                parts.append(f"{c.name}={c.value}")
            elif isinstance(c, Relation):
                parts.append(f"{c.rel} {c.other}")
            else:
                parts.append(f"in {c.room}")
        return ", ".join(parts)


# ===============================================================================
# Map and objects
# ===============================================================================
@dataclass
class ObjectInstance:
    id: int
    category: str
    attributes: dict
    cells: frozenset
    room_id: int = -1

    @property
    def centroid_cell(self):
        """Mean (x, y) of footprint cell indices (float)."""
        arr = np.array(sorted(self.cells), dtype=float)
        return float(arr[:, 0].mean()), float(arr[:, 1].mean())

    @property
    def bbox(self):
        xs = [c[0] for c in self.cells]
        ys = [c[1] for c in self.cells]
        return min(xs), min(ys), max(xs), max(ys)


class GridMap:
    """Ground-truth occupancy grid with rooms, doors and object instances.

    Args:
        cells (np.ndarray[int8]): (h, w) of FREE / OCCUPIED
        resolution (float): meters per cell
        rooms_gt (np.ndarray[int32]): (h, w) room id per cell, -1 outside rooms
        room_labels (dict): room id -> category label
        doors (list): list of door cell lists
        objects (list[ObjectInstance]):
    """

    def __init__(
        self,
        cells,
        resolution,
        *,
        rooms_gt=None,
        room_labels=None,
        room_rects=None,
        doors=None,
        objects=None,
        name=None,
    ):
        self.cells = np.asarray(cells, dtype=np.int8)
        self.height, self.width = self.cells.shape
        self.resolution = float(resolution)
        if rooms_gt is None:
            rooms_gt = np.where(self.cells == FREE, 0, -1).astype(np.int32)
        self.rooms_gt = np.asarray(rooms_gt, dtype=np.int32)
        self.room_labels = dict(room_labels or {})
        self.room_rects = dict(room_rects or {})
        self.doors = [list(d) for d in (doors or [])]
        self.objects = list(objects or [])
        self.name = name
        self.occupied = self.cells == OCCUPIED
        self.free = self.cells == FREE
        self._objects_by_id = {o.id: o for o in self.objects}

    def __repr__(self):
        return "{}<{}x{} @ {}m, {} rooms, {} objects>".format(
            self.__class__.__name__,
            self.width,
            self.height,
            self.resolution,
            len(self.room_labels),
            len(self.objects),
        )

    def in_bounds(self, cell):
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def cell_of(self, x, y):
        """Return the (x, y) cell containing a point in meters."""
        res = self.resolution
        return int(math.floor(x / res)), int(math.floor(y / res))

    def center_of(self, cell):
        """Return the center of a cell in meters."""
        res = self.resolution
        return (cell[0] + 0.5) * res, (cell[1] + 0.5) * res

    def get_object(self, obj_id):
        return self._objects_by_id[obj_id]

    def room_label(self, room_id):
        return self.room_labels.get(room_id)

    def object_room(self, cells):
        """Return the ground-truth room containing a footprint centroid."""
        arr = np.array(sorted(cells), dtype=float)
        cx = int(round(arr[:, 0].mean()))
        cy = int(round(arr[:, 1].mean()))
        rid = int(self.rooms_gt[cy, cx])
        if rid >= 0:
            return rid
        # Centroid on a wall: use the most frequent room among footprint cells
        counts = {}
        for x, y in sorted(cells):
            r = int(self.rooms_gt[y, x])
            if r >= 0:
                counts[r] = counts.get(r, 0) + 1
        if not counts:
            return -1
        return min(counts, key=lambda r: (-counts[r], r))


# ===============================================================================
# Agent state and observations
# ===============================================================================
@dataclass(frozen=True)
class AgentState:
    x: float
    y: float
    theta: float
    profile_id: str = "wheeled"
    elapsed: float = 0.0
    traveled: float = 0.0

    @property
    def pose(self):
        return (self.x, self.y, self.theta)


@dataclass(frozen=True)
class Detection:
    category: str
    confidence: float
    cells: frozenset
    #: Ground-truth instance id, only used by oracles
    instance_id: int = -1


@dataclass
class Observation:
    pose: tuple
    origin: tuple
    xs: np.ndarray
    ys: np.ndarray
    labels: np.ndarray
    detections: list = field(default_factory=list)

    @property
    def visible_cells(self):
        """Set of ((x, y), label)."""
        return {
            ((int(x), int(y)), int(lab))
            for x, y, lab in zip(self.xs, self.ys, self.labels)
        }

    def __len__(self):
        return len(self.xs)

    def mask(self, shape):
        m = np.zeros(shape, dtype=bool)
        m[self.ys, self.xs] = True
        return m

    def detection_for(self, instance_id):
        for d in self.detections:
            if d.instance_id == instance_id:
                return d
        return None


@dataclass(frozen=True)
class EpisodeSpec:
    id: str
    map_ref: str
    start: tuple
    goal: Goal
    timeout: float
    seed: int = 0
    tier: str = ""

    def to_dict(self):
        return {
            "id": self.id,
            "map": self.map_ref,
            "start": list(self.start),
            "goal": self.goal.to_dict(),
            "timeout": self.timeout,
            "seed": self.seed,
            "tier": self.tier,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            id=str(d["id"]),
            map_ref=d["map"],
            start=tuple(float(v) for v in d["start"]),
            goal=Goal.from_dict(d["goal"]),
            timeout=float(d["timeout"]),
            seed=int(d.get("seed", 0)),
            tier=d.get("tier", ""),
        )


# ===============================================================================
# Sensing
# ===============================================================================
def sense(grid_map, pose, profile, *, rng=None, p_fn=0.0, confidence=(0.7, 1.0)):
    """Full-circle raycast observation from `pose`.

    Args:
        grid_map (GridMap):
        pose (tuple): (x, y, theta) in meters / radians
        profile: object with `sensor_range` (meters)
        rng (np.random.Generator): used for detection confidence and
            false negatives. Without rng, confidence is the upper bound.
        p_fn (float): per-detection false-negative rate
    Returns:
        Observation
    """
    origin = grid_map.cell_of(pose[0], pose[1])
    if not grid_map.in_bounds(origin):
        raise ValueError(f"Pose {pose} is out of bounds")
    radius = profile.sensor_range / grid_map.resolution
    vis = grid_utils.visible_mask(grid_map.occupied, origin, radius)
    ys, xs = np.nonzero(vis)
    labels = grid_map.cells[ys, xs]

    detections = []
    for obj in grid_map.objects:
        seen = frozenset(c for c in obj.cells if vis[c[1], c[0]])
        if not seen:
            continue
        if rng is not None:
            if p_fn > 0 and rng.random() < p_fn:
                continue
            conf = float(rng.uniform(confidence[0], confidence[1]))
        else:
            conf = float(confidence[1])
        detections.append(Detection(obj.category, conf, seen, obj.id))

    return Observation(
        pose=tuple(pose),
        origin=origin,
        xs=xs.astype(np.int32),
        ys=ys.astype(np.int32),
        labels=labels.astype(np.int8),
        detections=detections,
    )


# ===============================================================================
# Kinematics
# ===============================================================================
def footprint_collides(occupied, resolution, x, y, radius):
    """Return True if a disk at (x, y) touches the square of an occupied cell.

    Cells outside the grid count as occupied.
    """
    h, w = occupied.shape
    r_cells = radius / resolution
    cx = x / resolution
    cy = y / resolution
    x0 = int(math.floor(cx - r_cells))
    x1 = int(math.floor(cx + r_cells))
    y0 = int(math.floor(cy - r_cells))
    y1 = int(math.floor(cy + r_cells))
    if x0 < 0 or y0 < 0 or x1 >= w or y1 >= h:
        return True
    win = occupied[y0 : y1 + 1, x0 : x1 + 1]
    if not win.any():
        return False
    iy, ix = np.nonzero(win)
    ix = ix + x0
    iy = iy + y0
    # Nearest point of each cell square [i, i+1] to the disk center
    nx = np.clip(cx, ix, ix + 1)
    ny = np.clip(cy, iy, iy + 1)
    d2 = (nx - cx) ** 2 + (ny - cy) ** 2
    return bool((d2 <= r_cells * r_cells).any())


def integrate_unicycle(x, y, theta, v, w, t):
    """Exact unicycle integration over `t` seconds."""
    if abs(w) < 1e-9:
        return x + v * t * math.cos(theta), y + v * t * math.sin(theta), theta
    th1 = theta + w * t
    nx = x + (v / w) * (math.sin(th1) - math.sin(theta))
    ny = y - (v / w) * (math.cos(th1) - math.cos(theta))
    return nx, ny, th1


def normalize_angle(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


def step(state, command, dt, grid_map, profile):
    """Advance `state` by one command.

    The command is clipped to the profile limits. If the swept footprint
    touches an occupied cell, the motion is discarded and only `elapsed`
    advances.

    Returns:
        (AgentState, blocked: bool)
    """
    v, w = command
    v = max(-profile.v_max, min(profile.v_max, v))
    w = max(-profile.w_max, min(profile.w_max, w))
    elapsed = state.elapsed + dt
    if v == 0 and w == 0:
        return replace(state, elapsed=elapsed), False

    dist = abs(v) * dt
    n = max(1, int(math.ceil(dist / (grid_map.resolution / 4.0))))
    px, py = state.x, state.y
    for i in range(1, n + 1):
        sx, sy, _ = integrate_unicycle(state.x, state.y, state.theta, v, w, dt * i / n)
        if footprint_collides(grid_map.occupied, grid_map.resolution, sx, sy, profile.radius):
            return replace(state, elapsed=elapsed), True
        px, py = sx, sy

    nx, ny, nth = integrate_unicycle(state.x, state.y, state.theta, v, w, dt)
    assert abs(nx - px) < 1e-9 and abs(ny - py) < 1e-9
    moved = math.hypot(nx - state.x, ny - state.y)
    return (
        replace(
            state,
            x=nx,
            y=ny,
            theta=normalize_angle(nth),
            elapsed=elapsed,
            traveled=state.traveled + moved,
        ),
        False,
    )


# ===============================================================================
# Ground-truth oracles
# ===============================================================================
def relation_holds(rel, cells_a, cells_b, resolution, rules=None):
    """Evaluate the geometric predicate `a <rel> b` on footprints.

    Returns:
        True / False, or UNSUPPORTED if `rel` has no configured rule.
    """
    rules = DEFAULT_RELATION_RULES if rules is None else rules
    if rel not in rules:
        return UNSUPPORTED
    params = rules[rel]
    if rel == "near":
        ca = np.array(sorted(cells_a), dtype=float).mean(axis=0)
        cb = np.array(sorted(cells_b), dtype=float).mean(axis=0)
        dist = float(np.hypot(*(ca - cb))) * resolution
        return dist <= params.get("max_distance", 1.5) + 1e-9
    elif rel == "on":
        margin = int(params.get("margin", 2))
        adjacent = any(
            (x + dx, y + dy) in cells_b
            for x, y in cells_a
            for dx in (-1, 0, 1)
            for dy in (-1, 0, 1)
        )
        if not adjacent:
            return False
        small, large = (cells_a, cells_b) if len(cells_a) <= len(cells_b) else (cells_b, cells_a)
        sx = [c[0] for c in small]
        sy = [c[1] for c in small]
        lx = [c[0] for c in large]
        ly = [c[1] for c in large]
        return (
            min(sx) >= min(lx) - margin
            and max(sx) <= max(lx) + margin
            and min(sy) >= min(ly) - margin
            and max(sy) <= max(ly) + margin
        )
    return UNSUPPORTED


def satisfies_goal(grid_map, obj, goal, rules=None):
    """Return True if instance `obj` satisfies `goal` against ground truth."""
    if obj.category != goal.category:
        return False
    for c in goal.constraints:
        if isinstance(c, AttrEq):
            if obj.attributes.get(c.name) != c.value:
                return False
        elif isinstance(c, Relation):
            ok = False
            for other in grid_map.objects:
                if other.id == obj.id or other.category != c.other:
                    continue
                if (
                    relation_holds(c.rel, obj.cells, other.cells, grid_map.resolution, rules)
                    is True
                ):
                    ok = True
                    break
            if not ok:
                return False
        elif isinstance(c, InRoom):
            if grid_map.room_label(obj.room_id) != c.room:
                return False
    return True


def satisfying_instances(grid_map, goal, rules=None):
    return [o for o in grid_map.objects if satisfies_goal(grid_map, o, goal, rules)]


def check_success(pose, goal, grid_map, success_distance, rules=None):
    """Return True if a satisfying instance is within reach and observable.

    Reach is the distance from the pose to the nearest footprint cell center.
    Observable means some footprint cell has line of sight from the pose cell.
    """
    origin = grid_map.cell_of(pose[0], pose[1])
    for obj in satisfying_instances(grid_map, goal, rules):
        for cell in sorted(obj.cells):
            cx, cy = grid_map.center_of(cell)
            if math.hypot(cx - pose[0], cy - pose[1]) > success_distance + 1e-9:
                continue
            if cell == origin or grid_utils.line_of_sight(grid_map.occupied, origin, cell):
                return True
    return False


def goal_region(grid_map, goal, success_distance, rules=None):
    """Return a bool grid of Free cells within `success_distance` of a
    satisfying instance."""
    res = grid_map.resolution
    region = np.zeros(grid_map.cells.shape, dtype=bool)
    r_cells = success_distance / res + 1e-9
    ys, xs = np.mgrid[0 : grid_map.height, 0 : grid_map.width]
    for obj in satisfying_instances(grid_map, goal, rules):
        for x, y in obj.cells:
            region |= (xs - x) ** 2 + (ys - y) ** 2 <= r_cells * r_cells
    return region & grid_map.free


def shortest_path_len(grid_map, start, goal, success_distance, rules=None):
    """Length (meters) of the shortest Free path from `start` to the goal region.

    Returns:
        meters, 0 if `start` is already within reach, or INFEASIBLE.
    """
    res = grid_map.resolution
    for obj in satisfying_instances(grid_map, goal, rules):
        for cell in obj.cells:
            cx, cy = grid_map.center_of(cell)
            if math.hypot(cx - start[0], cy - start[1]) <= success_distance + 1e-9:
                return 0.0
    region = goal_region(grid_map, goal, success_distance, rules)
    if not region.any():
        return INFEASIBLE
    sx, sy = grid_map.cell_of(start[0], start[1])
    if region[sy, sx]:
        return 0.0
    ys, xs = np.nonzero(region)
    dist = grid_utils.multi_source_distance(
        grid_map.free, list(zip(xs.tolist(), ys.tolist()))
    )
    d = float(dist[sy, sx])
    if not math.isfinite(d):
        return INFEASIBLE
    return d * res
