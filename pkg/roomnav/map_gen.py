"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

Seeded generator for room maps, object layouts and episode suites.
"""

import math
import os

import numpy as np
from scipy import ndimage

from roomnav import grid_utils
from roomnav.gridworld import (
    AttrEq,
    EpisodeSpec,
    Goal,
    GridMap,
    ObjectInstance,
    Relation,
    goal_region,
    relation_holds,
    satisfying_instances,
)
from roomnav.map_io import save_episodes, save_map
from roomnav.util import write

DEFAULT_GEN_PARAMS = {
    "rooms_x": 1,
    "rooms_y": 1,
    # Interior side length range (meters)
    "room_size_range": (3.5, 5.0),
    "door_width": 1.0,
    # Objects per square meter of room interior
    "object_density": 0.25,
    "resolution": 0.1,
    # One label per room (row-major); None: sampled from the priors' room types
    "room_labels": None,
    # {category: {room type: weight}}; None: bundled priors
    "category_room_priors": None,
}

TIER_PRESETS = {
    "easy": {
        "rooms_x": 1,
        "rooms_y": 1,
        "room_size_range": (3.5, 5.0),
        "timeout": 180.0,
    },
    "medium": {
        "rooms_x": 1,
        "rooms_y": 1,
        "room_size_range": (6.0, 8.0),
        "timeout": 240.0,
    },
    "hard": {
        "rooms_x": 3,
        "rooms_y": 1,
        "room_size_range": (3.5, 5.0),
        "timeout": 240.0,
    },
}

#: (length along the wall, depth) in meters
CATEGORY_SIZES = {
    "bathtub": (1.6, 0.7),
    "bed": (2.0, 1.4),
    "bookshelf": (1.0, 0.4),
    "cabinet": (0.8, 0.5),
    "chair": (0.5, 0.5),
    "cup": (0.1, 0.1),
    "desk": (1.2, 0.6),
    "dresser": (1.0, 0.5),
    "laptop": (0.4, 0.3),
    "microwave": (0.5, 0.4),
    "oven": (0.6, 0.6),
    "plant": (0.4, 0.4),
    "refrigerator": (0.8, 0.7),
    "shoe_rack": (0.8, 0.3),
    "sink": (0.6, 0.5),
    "sofa": (2.0, 0.9),
    "table": (1.2, 0.8),
    "toilet": (0.5, 0.7),
    "towel": (0.5, 0.2),
    "tv": (1.2, 0.3),
    "washing_machine": (0.6, 0.6),
}
DEFAULT_SIZE = (0.5, 0.5)

COLORS = ("red", "blue", "green", "white", "black", "brown", "yellow", "gray")
MATERIALS = ("wood", "metal", "fabric", "plastic")
MATERIAL_CATEGORIES = {"bed", "bookshelf", "cabinet", "chair", "desk", "sofa", "table"}

#: companion -> (relation, anchor)
COMPANIONS = {
    "microwave": ("near", "refrigerator"),
    "cup": ("on", "table"),
}

#: Largest profile radius plus planning margin (meters)
START_CLEARANCE = 0.45
#: Interior cells kept clear of furniture around doors (meters)
DOOR_CLEARANCE = 1.0
#: Minimum centroid distance between instances of the same category (meters)
SAME_CATEGORY_SPACING = 1.0


class InfeasibleParamsError(ValueError):
    """Raised when generator parameters cannot produce a valid map."""


def _default_priors():
    from roomnav.reasoners import PriorsTable

    return PriorsTable.load_default().priors


def check_params(params):
    for key in ("rooms_x", "rooms_y", "door_width", "resolution"):
        if not params[key] > 0:
            raise InfeasibleParamsError(f"Parameter {key} must be positive")
    lo, hi = params["room_size_range"]
    if not 0 < lo <= hi:
        raise InfeasibleParamsError(f"Invalid room_size_range {params['room_size_range']}")
    if params["object_density"] < 0:
        raise InfeasibleParamsError("object_density must be >= 0")
    priors = params["category_room_priors"]
    for cat, row in priors.items():
        total = sum(row.values())
        if abs(total - 1.0) > 1e-6:
            raise InfeasibleParamsError(f"Priors row {cat!r} sums to {total}, expected 1")
    n_rooms = params["rooms_x"] * params["rooms_y"]
    labels = params["room_labels"]
    if labels is not None and len(labels) != n_rooms:
        raise InfeasibleParamsError(f"Expected {n_rooms} room labels, got {len(labels)}")


# ===============================================================================
# _MapBuilder
# ===============================================================================
class _MapBuilder:
    """Mutable map under construction."""

    def __init__(self, params, rng):
        self.params = params
        self.rng = rng
        self.priors = params["category_room_priors"]
        res = self.res = params["resolution"]
        lo, hi = params["room_size_range"]
        nx, ny = params["rooms_x"], params["rooms_y"]
        col_w = [int(round(rng.uniform(lo, hi) / res)) for _ in range(nx)]
        row_h = [int(round(rng.uniform(lo, hi) / res)) for _ in range(ny)]
        self.door_cells_n = max(1, int(round(params["door_width"] / res)))
        if nx * ny > 1 and min(col_w + row_h) < self.door_cells_n + 2:
            raise InfeasibleParamsError(
                "Room too small for door: {} cells < door width {} + 2".format(
                    min(col_w + row_h), self.door_cells_n
                )
            )
        width = 1 + sum(w + 1 for w in col_w)
        height = 1 + sum(h + 1 for h in row_h)
        self.occ = np.ones((height, width), dtype=bool)
        self.rooms = []
        y0 = 1
        for j in range(ny):
            x0 = 1
            for i in range(nx):
                rect = (x0, y0, x0 + col_w[i] - 1, y0 + row_h[j] - 1)
                self.occ[rect[1] : rect[3] + 1, rect[0] : rect[2] + 1] = False
                self.rooms.append(
                    {"id": len(self.rooms), "grid": (i, j), "rect": rect, "extra": []}
                )
                x0 += col_w[i] + 1
            y0 += row_h[j] + 1

        self.doors = []
        self._make_doors(nx, ny)
        self._label_rooms()

        self.forbid = np.zeros(self.occ.shape, dtype=bool)
        clear = int(math.ceil(DOOR_CLEARANCE / res))
        for door in self.doors:
            for x, y in door:
                self.forbid[
                    max(0, y - clear) : y + clear + 1, max(0, x - clear) : x + clear + 1
                ] = True
        self.objects = []
        self.obj_zone = np.zeros(self.occ.shape, dtype=bool)

    def _make_doors(self, nx, ny):
        """Connect rooms along a random spanning tree."""
        pairs = []
        for j in range(ny):
            for i in range(nx):
                rid = j * nx + i
                if i + 1 < nx:
                    pairs.append((rid, rid + 1))
                if j + 1 < ny:
                    pairs.append((rid, rid + nx))
        order = self.rng.permutation(len(pairs)) if pairs else []
        parent = list(range(len(self.rooms)))

        def _find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for k in order:
            a, b = pairs[k]
            ra, rb = _find(a), _find(b)
            if ra == rb:
                continue
            parent[max(ra, rb)] = min(ra, rb)
            self._add_door(a, b)
        self.doors.sort()

    def _add_door(self, a, b):
        ra = self.rooms[a]["rect"]
        rb = self.rooms[b]["rect"]
        dw = self.door_cells_n
        if rb[0] > ra[2]:
            # b is right of a
            wx = ra[2] + 1
            start = ra[1] + (ra[3] - ra[1] + 1 - dw) // 2
            cells = [(wx, y) for y in range(start, start + dw)]
            rect = [wx, start, wx, start + dw - 1]
        else:
            wy = ra[3] + 1
            start = ra[0] + (ra[2] - ra[0] + 1 - dw) // 2
            cells = [(x, wy) for x in range(start, start + dw)]
            rect = [start, wy, start + dw - 1, wy]
        for x, y in cells:
            self.occ[y, x] = False
        self.rooms[min(a, b)]["extra"].append(rect)
        self.doors.append(cells)

    def _label_rooms(self):
        labels = self.params["room_labels"]
        if labels is None:
            types = sorted({rt for row in self.priors.values() for rt in row})
            n = len(self.rooms)
            idx = self.rng.choice(len(types), size=n, replace=n > len(types))
            labels = [types[int(i)] for i in idx]
        for room, label in zip(self.rooms, labels):
            room["label"] = label

    # --- Objects -------------------------------------------------------------

    def room_free(self, room):
        x0, y0, x1, y1 = room["rect"]
        m = np.zeros(self.occ.shape, dtype=bool)
        m[y0 : y1 + 1, x0 : x1 + 1] = True
        return m & ~self.occ

    def _wall_candidates(self, room, length, depth):
        x0, y0, x1, y1 = room["rect"]
        w = x1 - x0 + 1
        h = y1 - y0 + 1
        res = []
        if depth <= 0.35 * h:
            for x in range(x0, x1 - length + 2):
                res.append((x, y0, length, depth))
                res.append((x, y1 - depth + 1, length, depth))
        if depth <= 0.35 * w:
            for y in range(y0, y1 - length + 2):
                res.append((x0, y, depth, length))
                res.append((x1 - depth + 1, y, depth, length))
        return res

    def _cells_ok(self, cells, *, ignore=None):
        for x, y in cells:
            if self.occ[y, x] or self.forbid[y, x]:
                return False
        zone = self.obj_zone if ignore is None else self._zone_without(ignore)
        return not any(zone[y, x] for x, y in cells)

    def _zone_without(self, ignore):
        zone = np.zeros(self.occ.shape, dtype=bool)
        for obj in self.objects:
            if obj.id != ignore.id:
                zone |= self._grow(obj.cells, 2)
        return zone

    def _grow(self, cells, n):
        m = grid_utils.mask_of(cells, self.occ.shape)
        return ndimage.binary_dilation(m, iterations=n)

    def _spacing_ok(self, category, cells):
        c = np.array(sorted(cells), dtype=float).mean(axis=0)
        for obj in self.objects:
            if obj.category != category:
                continue
            oc = np.array(obj.centroid_cell)
            if float(np.hypot(*(c - oc))) * self.res < SAME_CATEGORY_SPACING:
                return False
        return True

    def _commit(self, category, cells, room):
        """Add an object if the room stays connected. Returns the object or None."""
        before = self.occ.copy()
        for x, y in cells:
            self.occ[y, x] = True
        _, n = ndimage.label(self.room_free(room))
        if n != 1:
            self.occ = before
            return None
        attrs = {"color": str(self.rng.choice(COLORS))}
        if category in MATERIAL_CATEGORIES:
            attrs["material"] = str(self.rng.choice(MATERIALS))
        obj = ObjectInstance(
            id=len(self.objects),
            category=category,
            attributes=attrs,
            cells=frozenset(cells),
            room_id=room["id"],
        )
        self.objects.append(obj)
        self.obj_zone |= self._grow(obj.cells, 2)
        return obj

    def place(self, category, room, *, anchor=None, rel=None, far_from=None):
        """Place one instance of `category` in `room`.

        Args:
            anchor (ObjectInstance): place so that `category <rel> anchor` holds
            far_from (list[ObjectInstance]): keep the relation false for these
        Returns:
            ObjectInstance or None
        """
        length, depth = CATEGORY_SIZES.get(category, DEFAULT_SIZE)
        lc = max(1, int(round(length / self.res)))
        dc = max(1, int(round(depth / self.res)))
        if rel == "on":
            cands = []
            near = self._grow(anchor.cells, 1) & ~grid_utils.mask_of(anchor.cells, self.occ.shape)
            ys, xs = np.nonzero(near)
            for x, y in zip(xs.tolist(), ys.tolist()):
                cands.append((x, y, lc, lc))
        else:
            cands = self._wall_candidates(room, lc, dc)
        if not cands:
            return None
        for k in self.rng.permutation(len(cands)):
            x, y, w, h = cands[int(k)]
            cells = {(cx, cy) for cx in range(x, x + w) for cy in range(y, y + h)}
            h_max, w_max = self.occ.shape
            if any(not (0 <= cx < w_max and 0 <= cy < h_max) for cx, cy in cells):
                continue
            if not self._cells_ok(cells, ignore=anchor):
                continue
            if anchor is not None and rel == "near":
                if any(self._grow(anchor.cells, 1)[cy, cx] for cx, cy in cells):
                    continue
            if not self._spacing_ok(category, cells):
                continue
            if anchor is not None:
                if relation_holds(rel, cells, anchor.cells, self.res) is not True:
                    continue
            if far_from and any(
                relation_holds(r, cells, o.cells, self.res) is True
                for o in far_from
                for r in ("near", "on")
            ):
                continue
            obj = self._commit(category, cells, room)
            if obj is not None:
                return obj
        return None

    def populate(self):
        """Fill every room by sampling categories from the priors column."""
        cats = sorted(self.priors)
        for room in self.rooms:
            weights = np.array([self.priors[c].get(room["label"], 0.0) for c in cats])
            if weights.sum() <= 0:
                continue
            x0, y0, x1, y1 = room["rect"]
            area = (x1 - x0 + 1) * (y1 - y0 + 1) * self.res * self.res
            n = max(1, int(round(self.params["object_density"] * area)))
            for _ in range(n):
                cat = cats[int(self.rng.choice(len(cats), p=weights / weights.sum()))]
                self.place(cat, room)

    def build(self, name=None):
        h, w = self.occ.shape
        rooms_gt = np.full((h, w), -1, dtype=np.int32)
        room_rects = {}
        for room in self.rooms:
            rects = [list(room["rect"])] + [list(r) for r in room["extra"]]
            room_rects[room["id"]] = rects
            for x0, y0, x1, y1 in rects:
                rooms_gt[y0 : y1 + 1, x0 : x1 + 1] = room["id"]
        cells = np.where(self.occ, 1, 0).astype(np.int8)
        grid_map = GridMap(
            cells,
            self.res,
            rooms_gt=rooms_gt,
            room_labels={r["id"]: r["label"] for r in self.rooms},
            room_rects=room_rects,
            doors=self.doors,
            objects=[
                ObjectInstance(o.id, o.category, dict(o.attributes), o.cells)
                for o in self.objects
            ],
            name=name,
        )
        for obj in grid_map.objects:
            obj.room_id = grid_map.object_room(obj.cells)
        return grid_map


def _merge_params(params):
    p = dict(DEFAULT_GEN_PARAMS)
    p.update(params or {})
    if p["category_room_priors"] is None:
        p["category_room_priors"] = _default_priors()
    return p


def generate_map(seed, params=None, *, name=None):
    """Generate a map with rooms, doors and prior-sampled objects.

    Deterministic for a fixed `seed` and `params`.

    Raises:
        InfeasibleParamsError:
    """
    p = _merge_params(params)
    check_params(p)
    rng = np.random.default_rng(seed)
    builder = _MapBuilder(p, rng)
    builder.populate()
    return builder.build(name=name or f"map_{seed}")


# ===============================================================================
# Episodes
# ===============================================================================
def _start_candidates(grid_map, room_id, rng):
    trav = grid_utils.inflate(grid_map.occupied, START_CLEARANCE / grid_map.resolution)
    ys, xs = np.nonzero(trav & (grid_map.rooms_gt == room_id))
    order = rng.permutation(len(xs))
    return [(int(xs[i]), int(ys[i])) for i in order]


def _reachable_goal(grid_map, goal, start_cell, success_distance):
    trav = grid_utils.inflate(grid_map.occupied, START_CLEARANCE / grid_map.resolution)
    region = goal_region(grid_map, goal, success_distance) & trav
    if not region.any():
        return False
    ys, xs = np.nonzero(region)
    dist = grid_utils.multi_source_distance(trav, list(zip(xs.tolist(), ys.tolist())))
    return bool(np.isfinite(dist[start_cell[1], start_cell[0]]))


def _informative_target(builder, grid_map, start_room):
    """Pick a category whose prior argmax room holds it and isn't the start room."""
    priors = builder.priors
    labels = grid_map.room_labels
    start_label = labels[start_room]
    cands = []
    for obj in grid_map.objects:
        same_cat = [o for o in grid_map.objects if o.category == obj.category]
        if any(o.room_id == start_room for o in same_cat):
            continue
        row = priors.get(obj.category, {})
        best = max(row.get(lab, 0.0) for lab in labels.values())
        if row.get(labels[obj.room_id], 0.0) < best or best <= row.get(start_label, 0.0):
            continue
        cands.append(obj)
    return cands


def _plan_goal(builder, grid_map, tier, constraints, start_room, rng):
    """Choose (and plant objects for) a goal. Returns a Goal or None."""
    others = [r for r in builder.rooms if r["id"] != start_room] or builder.rooms
    if constraints == "none":
        if tier == "hard":
            cands = _informative_target(builder, grid_map, start_room)
        else:
            cands = list(grid_map.objects)
        if not cands:
            return None
        obj = cands[int(rng.integers(len(cands)))]
        return Goal(obj.category)

    if constraints == "attribute":
        pool = [r for r in others] if tier == "hard" else builder.rooms
        room = pool[int(rng.integers(len(pool)))]
        cats = sorted(c for c in CATEGORY_SIZES if c not in COMPANIONS)
        cat = cats[int(rng.integers(len(cats)))]
        target = builder.place(cat, room)
        if target is None:
            return None
        # Same-category distractor, preferably where the agent starts
        builder.place(cat, builder.rooms[start_room]) or builder.place(cat, room)
        color = target.attributes["color"]
        for obj in builder.objects:
            if obj.category == cat and obj is not target and obj.attributes["color"] == color:
                alt = [c for c in COLORS if c != color]
                obj.attributes["color"] = alt[int(rng.integers(len(alt)))]
        return Goal(cat, (AttrEq("color", color),))

    if constraints == "relation":
        comp = sorted(COMPANIONS)[int(rng.integers(len(COMPANIONS)))]
        rel, anchor_cat = COMPANIONS[comp]
        pool = others if tier == "hard" else builder.rooms
        row = builder.priors.get(anchor_cat, {})
        room = max(pool, key=lambda r: (row.get(r["label"], 0.0), -r["id"]))
        anchor = [
            o for o in builder.objects if o.category == anchor_cat and o.room_id == room["id"]
        ]
        anchor = anchor[0] if anchor else builder.place(anchor_cat, room)
        if anchor is None:
            return None
        target = builder.place(comp, room, anchor=anchor, rel=rel)
        if target is None:
            return None
        anchors = [o for o in builder.objects if o.category == anchor_cat]
        # Distractor companion that does not satisfy the relation
        builder.place(comp, builder.rooms[start_room], far_from=anchors)
        return Goal(comp, (Relation(rel, anchor_cat),))
    raise ValueError(f"Unknown constraints mode {constraints!r}")


def generate_episode(
    seed,
    *,
    tier="hard",
    constraints="none",
    params=None,
    success_distance=1.0,
    sensor_range=6.0,
    episode_id=None,
    max_attempts=50,
):
    """Generate a map and a solvable episode for a difficulty tier.

    Returns:
        (GridMap, EpisodeSpec) -- spec.map_ref is the map name
    """
    preset = TIER_PRESETS[tier]
    p = dict(params or {})
    for key in ("rooms_x", "rooms_y", "room_size_range"):
        p.setdefault(key, preset[key])
    p = _merge_params(p)
    check_params(p)
    episode_id = episode_id or f"{tier}_{seed}"

    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, attempt])
        builder = _MapBuilder(p, rng)
        builder.populate()
        start_room = 0 if tier != "hard" else int(rng.integers(len(builder.rooms)))
        grid_map = builder.build()
        goal = _plan_goal(builder, grid_map, tier, constraints, start_room, rng)
        if goal is None:
            continue
        grid_map = builder.build(name=episode_id)
        targets = satisfying_instances(grid_map, goal)
        if not targets:
            continue
        if tier == "hard" and any(o.room_id == start_room for o in targets):
            continue

        start = None
        for cell in _start_candidates(grid_map, start_room, rng)[:300]:
            cx, cy = grid_map.center_of(cell)
            dists = [
                math.hypot(*np.subtract(grid_map.center_of(c), (cx, cy)))
                for o in targets
                for c in o.cells
            ]
            if min(dists) <= success_distance + 0.5:
                continue
            if tier == "easy":
                vis = grid_utils.visible_mask(
                    grid_map.occupied, cell, sensor_range / grid_map.resolution
                )
                if not any(vis[y, x] for o in targets for x, y in o.cells):
                    continue
            if not _reachable_goal(grid_map, goal, cell, success_distance):
                continue
            start = (cx, cy, float(rng.uniform(-math.pi, math.pi)))
            break
        if start is None:
            continue
        spec = EpisodeSpec(
            id=episode_id,
            map_ref=episode_id,
            start=start,
            goal=goal,
            timeout=preset["timeout"],
            seed=int(seed),
            tier=tier,
        )
        return grid_map, spec
    raise InfeasibleParamsError(
        f"Could not generate a feasible {tier} episode for seed {seed}"
    )


def generate_suite(
    out_dir,
    *,
    seed=0,
    count=10,
    tier="mixed",
    constraints="none",
    params=None,
    success_distance=1.0,
):
    """Write `count` maps and a `suite.json` episode file into `out_dir`.

    `tier` may be 'mixed' to cycle through easy, medium and hard.

    Returns:
        path of the episode file
    """
    os.makedirs(out_dir, exist_ok=True)
    tiers = ("easy", "medium", "hard")
    specs = []
    for i in range(count):
        t = tiers[i % 3] if tier == "mixed" else tier
        ep_seed = seed + i
        episode_id = f"{t}_{ep_seed:04d}"
        grid_map, spec = generate_episode(
            ep_seed,
            tier=t,
            constraints=constraints,
            params=params,
            success_distance=success_distance,
            episode_id=episode_id,
        )
        map_path = os.path.join(out_dir, f"{episode_id}.json")
        save_map(grid_map, map_path)
        specs.append(
            EpisodeSpec(
                id=spec.id,
                map_ref=os.path.abspath(map_path),
                start=spec.start,
                goal=spec.goal,
                timeout=spec.timeout,
                seed=spec.seed,
                tier=spec.tier,
            )
        )
        write(f"Generated {episode_id}: {grid_map!r}, goal '{spec.goal}'", debug=True)
    suite_path = os.path.join(out_dir, "suite.json")
    save_episodes(specs, suite_path)
    return suite_path
