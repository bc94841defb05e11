"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

Incremental three-layer scene representation: room, viewpoint and object
nodes with typed edges, built from a stream of observations.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from roomnav import grid_utils
from roomnav.config import dilation_radius_cells
from roomnav.grid_utils import FREE, OCCUPIED, UNKNOWN
from roomnav.gridworld import UNSUPPORTED
from roomnav.reasoners import (
    UNKNOWN as UNKNOWN_VALUE,
    UNLABELED,
    AttributeQueryContext,
    EarlyStopContext,
    RelationQueryContext,
    RoomLabelContext,
    RoomQueryContext,
)
from roomnav.util import DEBUG_FLAGS, write

#: Relation could not be decided from the stored views
UNDETERMINED = "undetermined"

_BIG = np.iinfo(np.int32).max


# ===============================================================================
# Nodes
# ===============================================================================
class RoomNode:
    def __init__(self, room_id, mask):
        self.id = room_id
        #: Free cells of the component (bool grid)
        self.mask = mask
        #: Known-Free cells closest to this room (geodesic)
        self.territory = mask
        self.category = UNLABELED
        self.best_view = None
        self.best_view_count = 0
        #: Viewpoint used for the last classification
        self.labeled_view = None

    def __repr__(self):
        return f"RoomNode<{self.id} {self.category}, {self.size} cells>"

    @property
    def size(self):
        return int(self.mask.sum())


class ViewpointNode:
    def __init__(self, vp_id, position, cell, coverage, observation):
        self.id = vp_id
        self.position = position
        self.cell = cell
        #: Flat indices of the coverage region
        self.coverage = coverage
        self.observation = observation

    def __repr__(self):
        return f"ViewpointNode<{self.id} @ {self.cell}>"


class ObjectNode:
    def __init__(self, obj_id, category, confidence, cells):
        self.id = obj_id
        self.category = category
        self.confidence = confidence
        self.cells = set(cells)
        self.best_view = None
        self.best_view_count = 0
        #: Best observation of any capture (viewpoint or not)
        self.best_obs = None
        self.best_obs_count = 0
        self.attributes = {}

    def __repr__(self):
        return f"ObjectNode<{self.id} {self.category}, {len(self.cells)} cells>"

    @property
    def bbox(self):
        xs = [c[0] for c in self.cells]
        ys = [c[1] for c in self.cells]
        return min(xs), min(ys), max(xs), max(ys)

    @property
    def centroid(self):
        arr = np.array(sorted(self.cells), dtype=float)
        return float(arr[:, 0].mean()), float(arr[:, 1].mean())


@dataclass(frozen=True)
class EarlyStop:
    current: int
    new: int


@dataclass(frozen=True)
class RoomQuery:
    uncovered: tuple
    current: object = None


def _touches(cells, other):
    """True if footprints overlap or are 8-adjacent."""
    for x, y in other:
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if (x + dx, y + dy) in cells:
                    return True
    return False


def _rle(mask):
    """Run-length encode a bool grid as [[flat start, length], ...]."""
    flat = np.flatnonzero(mask.ravel())
    if not len(flat):
        return []
    breaks = np.flatnonzero(np.diff(flat) != 1)
    starts = np.concatenate(([flat[0]], flat[breaks + 1]))
    ends = np.concatenate((flat[breaks], [flat[-1]]))
    return [[int(s), int(e - s + 1)] for s, e in zip(starts, ends)]


# ===============================================================================
# SceneRep
# ===============================================================================
class SceneRep:
    """Agent belief plus the room / viewpoint / object graph.

    Args:
        shape (tuple): (h, w) of the grid
        resolution (float): meters per cell
        d_cover (float): coverage radius (meters)
        viewpoint_eps (int): novel cells needed to admit a viewpoint
        dilation_radius (int): cells
        door_width_max (float): meters
        min_room_cells (int):
        merge_distance (float): centroid distance for object association (meters)
    """

    def __init__(
        self,
        shape,
        resolution,
        *,
        d_cover=3.0,
        viewpoint_eps=25,
        dilation_radius=5,
        door_width_max=1.2,
        min_room_cells=100,
        merge_distance=0.5,
    ):
        self.shape = tuple(shape)
        self.resolution = resolution
        self.d_cover = d_cover
        self.viewpoint_eps = viewpoint_eps
        self.dilation_radius = dilation_radius
        self.door_width_max = door_width_max
        self.min_room_cells = min_room_cells
        self.merge_distance = merge_distance

        self.known = np.full(self.shape, UNKNOWN, dtype=np.int8)
        #: Cells within d_cover and line of sight of any capture
        self.covered = np.zeros(self.shape, dtype=bool)
        #: Union of viewpoint coverage regions
        self.cov_prev = np.zeros(self.shape, dtype=bool)
        #: Incremented whenever `known` changes
        self.version = 0
        #: Incremented on new object nodes and new viewpoint-object edges
        self.object_updates = 0

        self.rooms = {}
        self.viewpoints = {}
        self.objects = {}
        self.edges_rr = set()
        self.edges_rv = {}
        self.edges_ro = {}
        self.edges_vo = set()
        self.edges_oo = {}
        self.trajectory = []
        self.room_visits = []
        #: Dropped object id -> surviving id
        self.merged_into = {}
        self.new_room_ids = []
        self.territory_labels = np.full(self.shape, _BIG, dtype=np.int32)

        self._next_room_id = 0
        self._next_vp_id = 0
        self._next_obj_id = 0
        self._relation_cache = {}
        self._last = None

    def __repr__(self):
        return "SceneRep<{} rooms, {} viewpoints, {} objects>".format(
            len(self.rooms), len(self.viewpoints), len(self.objects)
        )

    @classmethod
    def from_config(cls, shape, config):
        res = config["world"]["resolution"]
        sc = config["scene"]
        return cls(
            shape,
            res,
            d_cover=sc["d_cover"],
            viewpoint_eps=sc["viewpoint_eps"],
            dilation_radius=dilation_radius_cells(config),
            door_width_max=sc["door_width_max"],
            min_room_cells=int(math.ceil(sc["min_room_area"] / (res * res))),
            merge_distance=sc["merge_distance"],
        )

    # --- Helpers -------------------------------------------------------------

    def cell_of(self, pose):
        res = self.resolution
        return int(math.floor(pose[0] / res)), int(math.floor(pose[1] / res))

    def resolve_object(self, obj_id):
        """Follow merges; return the live object id or None."""
        while obj_id in self.merged_into:
            obj_id = self.merged_into[obj_id]
        return obj_id if obj_id in self.objects else None

    def room_at(self, cell):
        """Return the id of the room whose territory contains `cell`, or None."""
        x, y = cell
        rid = self.territory_labels[y, x]
        return None if rid == _BIG else int(rid)

    def objects_in_room(self, room_id):
        return sorted(oid for oid, rid in self.edges_ro.items() if rid == room_id)

    def capture_coverage(self, obs):
        """Bool grid of observed cells strictly within d_cover of the capture cell."""
        ox, oy = obs.origin
        r = self.d_cover / self.resolution
        d2 = (obs.xs - ox) ** 2 + (obs.ys - oy) ** 2
        sel = d2 < r * r
        m = np.zeros(self.shape, dtype=bool)
        m[obs.ys[sel], obs.xs[sel]] = True
        return m

    # --- Observations --------------------------------------------------------

    def integrate_observation(self, obs):
        """Fuse one observation into the belief and the object layer.

        Returns:
            dict detection index -> object id
        """
        xs, ys = obs.xs, obs.ys
        cur = self.known[ys, xs]
        new = np.where(
            (obs.labels == OCCUPIED) | (cur == OCCUPIED), OCCUPIED, FREE
        ).astype(np.int8)
        if (new != cur).any():
            self.known[ys, xs] = new
            self.version += 1
        cov = self.capture_coverage(obs)
        self.covered |= cov

        assoc = {}
        for k, det in enumerate(obs.detections):
            assoc[k] = self._associate(det, obs)
        # Earlier detections may have been merged by later ones
        assoc = {k: self.resolve_object(oid) for k, oid in assoc.items()}
        self.trajectory.append(tuple(obs.pose))
        self._last = (obs, assoc, cov)
        if self.rooms:
            for oid in set(assoc.values()):
                self._assign_object_room(oid)
        return assoc

    def _associate(self, det, obs):
        cands = []
        for oid in sorted(self.objects):
            node = self.objects[oid]
            if node.category != det.category:
                continue
            if _touches(node.cells, det.cells):
                cands.append(node)
                continue
            c = np.array(sorted(det.cells), dtype=float).mean(axis=0)
            d = math.hypot(c[0] - node.centroid[0], c[1] - node.centroid[1])
            if d * self.resolution < self.merge_distance:
                cands.append(node)
        if not cands:
            node = ObjectNode(self._next_obj_id, det.category, det.confidence, det.cells)
            self._next_obj_id += 1
            self.objects[node.id] = node
            self.object_updates += 1
        else:
            node = cands[0]
            for other in cands[1:]:
                self._merge_objects(node, other)
            node.cells |= det.cells
            node.confidence = max(node.confidence, det.confidence)
        n = len(det.cells)
        if n > node.best_obs_count:
            node.best_obs = obs
            node.best_obs_count = n
        return node.id

    def _merge_objects(self, keep, drop):
        keep.cells |= drop.cells
        keep.confidence = max(keep.confidence, drop.confidence)
        for name, val in drop.attributes.items():
            keep.attributes.setdefault(name, val)
        if drop.best_obs_count > keep.best_obs_count:
            keep.best_obs, keep.best_obs_count = drop.best_obs, drop.best_obs_count
        if drop.best_view_count > keep.best_view_count:
            keep.best_view, keep.best_view_count = drop.best_view, drop.best_view_count
        self.edges_vo = {
            (v, keep.id if o == drop.id else o) for v, o in self.edges_vo
        }
        oo = {}
        for (i, j), rels in self.edges_oo.items():
            i = keep.id if i == drop.id else i
            j = keep.id if j == drop.id else j
            if i != j:
                oo.setdefault((i, j), set()).update(rels)
        self.edges_oo = oo
        self.edges_ro.pop(drop.id, None)
        self._relation_cache = {
            k: v for k, v in self._relation_cache.items() if drop.id not in k[:2]
        }
        del self.objects[drop.id]
        self.merged_into[drop.id] = keep.id

    def observation_objects(self, obs):
        """Object ids detected in `obs` (by footprint overlap)."""
        if self._last is not None and self._last[0] is obs:
            return set(self._last[1].values())
        res = set()
        for det in obs.detections:
            for oid, node in self.objects.items():
                if node.category == det.category and node.cells & det.cells:
                    res.add(oid)
        return res

    def maybe_add_viewpoint(self, pose, obs, eps=None):
        """Admit a viewpoint iff its coverage adds more than `eps` novel cells.

        Returns:
            viewpoint id or None
        """
        eps = self.viewpoint_eps if eps is None else eps
        if self._last is not None and self._last[0] is obs:
            cov = self._last[2]
        else:
            cov = self.capture_coverage(obs)
        novel = int((cov & ~self.cov_prev).sum())
        if novel <= eps:
            return None
        vid = self._next_vp_id
        self._next_vp_id += 1
        vp = ViewpointNode(
            vid, (pose[0], pose[1]), self.cell_of(pose), np.flatnonzero(cov.ravel()), obs
        )
        self.viewpoints[vid] = vp
        self.cov_prev |= cov

        seen = sorted(self.observation_objects(obs))
        for det in obs.detections:
            for oid in seen:
                node = self.objects[oid]
                if node.category != det.category or not (node.cells & det.cells):
                    continue
                if (vid, oid) not in self.edges_vo:
                    self.edges_vo.add((vid, oid))
                    self.object_updates += 1
                if len(det.cells) > node.best_view_count:
                    node.best_view = vid
                    node.best_view_count = len(det.cells)
        self._assign_viewpoint_room(vp)
        for room in self.rooms.values():
            n = int(room.mask[obs.ys, obs.xs].sum())
            if n > room.best_view_count:
                room.best_view = vid
                room.best_view_count = n
        if "sense" in DEBUG_FLAGS:
            write(f"viewpoint {vid} at {vp.cell}: {novel} novel cells", debug=True)
        return vid

    # --- Rooms ---------------------------------------------------------------

    def segment_rooms(self, dilation_radius=None):
        """Recompute rooms from the belief, keeping ids stable.

        Sets `new_room_ids` to the ids created by this call.
        """
        r = self.dilation_radius if dilation_radius is None else dilation_radius
        occ = self.known == OCCUPIED
        free = self.known == FREE
        if r > 0:
            dil = ndimage.binary_dilation(occ, structure=grid_utils.disk_structure(r))
        else:
            dil = occ
        labels, n = ndimage.label(free & ~dil)
        sizes = np.bincount(labels.ravel(), minlength=n + 1)
        comps = [k for k in range(1, n + 1) if sizes[k] >= self.min_room_cells]

        # Stable ids: greedy maximal-overlap inheritance, ties to lower old id
        pairs = []
        for k in comps:
            comp = labels == k
            for old_id in sorted(self.rooms):
                ov = int((comp & self.rooms[old_id].mask).sum())
                if ov > 0:
                    pairs.append((-ov, old_id, k))
        pairs.sort()
        comp_id = {}
        used = set()
        for _neg_ov, old_id, k in pairs:
            if k in comp_id or old_id in used:
                continue
            comp_id[k] = old_id
            used.add(old_id)
        new_ids = []
        first_index = {k: int(np.flatnonzero((labels == k).ravel())[0]) for k in comps}
        for k in sorted(comps, key=lambda k: first_index[k]):
            if k not in comp_id:
                comp_id[k] = self._next_room_id
                self._next_room_id += 1
                new_ids.append(comp_id[k])
        for k in comps:
            self._next_room_id = max(self._next_room_id, comp_id[k] + 1)

        rooms = {}
        for k in comps:
            rid = comp_id[k]
            node = RoomNode(rid, labels == k)
            old = self.rooms.get(rid)
            if old is not None:
                node.category = old.category
                node.labeled_view = old.labeled_view
            rooms[rid] = node
        self.rooms = rooms
        self.new_room_ids = new_ids

        self._compute_territories(r, free)
        self._compute_door_edges()
        self.edges_rv = {}
        for vp in self.viewpoints.values():
            self._assign_viewpoint_room(vp)
        self.edges_ro = {}
        for oid in self.objects:
            self._assign_object_room(oid)
        self._evaluate_best_views()
        return self

    def _compute_territories(self, r, free):
        seeds = np.full(self.shape, _BIG, dtype=np.int32)
        for rid, room in self.rooms.items():
            seeds[room.mask] = rid
        t = grid_utils.geodesic_partition(
            free, seeds, limit=(r + 2) * grid_utils.SQRT2, fill=_BIG
        )
        self.territory_labels = t
        for rid, room in self.rooms.items():
            room.territory = t == rid

    def _compute_door_edges(self):
        t = self.territory_labels
        contact = {}
        for a, b, ca, cb in (
            (t[:, :-1], t[:, 1:], (0, 0), (0, 1)),
            (t[:-1, :], t[1:, :], (0, 0), (1, 0)),
        ):
            sel = (a != b) & (a != _BIG) & (b != _BIG)
            ys, xs = np.nonzero(sel)
            for y, x in zip(ys.tolist(), xs.tolist()):
                ra, rb = int(a[y, x]), int(b[y, x])
                key = (min(ra, rb), max(ra, rb))
                side = contact.setdefault(key, (set(), set()))
                side[0].add((x + ca[1], y + ca[0]) if ra == key[0] else (x + cb[1], y + cb[0]))
                side[1].add((x + cb[1], y + cb[0]) if ra == key[0] else (x + ca[1], y + ca[0]))
        self.edges_rr = set()
        for key, (sa, sb) in contact.items():
            # Extent of the contact strip along its longer axis
            xs = [c[0] for c in sa | sb]
            ys = [c[1] for c in sa | sb]
            width = (max(max(xs) - min(xs), max(ys) - min(ys)) + 1) * self.resolution
            if 0 < width <= self.door_width_max + 1e-9:
                self.edges_rr.add(key)

    def _assign_viewpoint_room(self, vp):
        rid = self.room_at(vp.cell)
        if rid is None:
            self.edges_rv.pop(vp.id, None)
        else:
            self.edges_rv[vp.id] = rid

    def _assign_object_room(self, oid):
        node = self.objects.get(oid)
        if node is None:
            return
        counts = {}
        h, w = self.shape
        for x, y in node.cells:
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    cx, cy = x + dx, y + dy
                    if 0 <= cx < w and 0 <= cy < h:
                        rid = self.territory_labels[cy, cx]
                        if rid != _BIG:
                            counts[int(rid)] = counts.get(int(rid), 0) + 1
        if counts:
            self.edges_ro[oid] = min(counts, key=lambda r: (-counts[r], r))
        else:
            self.edges_ro.pop(oid, None)

    def _evaluate_best_views(self):
        """Best view per room: the viewpoint observing most of its mask cells."""
        if not self.rooms:
            return
        ids = np.full(self.shape, -1, dtype=np.int64)
        for rid, room in self.rooms.items():
            ids[room.mask] = rid
        n = max(self.rooms) + 2
        for room in self.rooms.values():
            room.best_view = None
            room.best_view_count = 0
        for vid in sorted(self.viewpoints):
            obs = self.viewpoints[vid].observation
            counts = np.bincount(ids[obs.ys, obs.xs] + 1, minlength=n)
            for rid, room in self.rooms.items():
                c = int(counts[rid + 1])
                if c > room.best_view_count:
                    room.best_view = vid
                    room.best_view_count = c

    def update_room_labels(self, reasoner):
        """Classify rooms whose best view changed since the last query.

        Returns:
            number of reasoner queries issued
        """
        queries = 0
        for rid in sorted(self.rooms):
            room = self.rooms[rid]
            if room.best_view is None or room.best_view == room.labeled_view:
                continue
            obs = self.viewpoints[room.best_view].observation
            inside = room.mask[obs.ys, obs.xs]
            ctx = RoomLabelContext(obs, rid, obs.xs[inside], obs.ys[inside])
            room.category = reasoner.decide(ctx) or UNLABELED
            room.labeled_view = room.best_view
            queries += 1
        return queries

    def note_room_visit(self, pose):
        """Append the room containing `pose` to the visit sequence if it changed."""
        rid = self.room_at(self.cell_of(pose))
        if rid is not None and (not self.room_visits or self.room_visits[-1] != rid):
            self.room_visits.append(rid)
        return rid

    # --- On-demand inference ---------------------------------------------------

    def view_of(self, node):
        if node.best_view is not None and node.best_view in self.viewpoints:
            return self.viewpoints[node.best_view].observation
        return node.best_obs

    def infer_attribute_on_demand(self, category, constraint, reasoner, goal=None):
        """Annotate every node of `category` with `constraint.name`.

        Each (node, name) pair is asked at most once; an unknown answer is
        kept as well. Nodes without any view yet are left for a later call.

        Returns:
            number of reasoner queries issued
        """
        queries = 0
        for oid in sorted(self.objects):
            node = self.objects[oid]
            if node.category != category or constraint.name in node.attributes:
                continue
            obs = self.view_of(node)
            if obs is None:
                continue
            ctx = AttributeQueryContext(
                obs, category, constraint.name, oid, frozenset(node.cells), goal
            )
            try:
                value = reasoner.decide(ctx)
            except Exception as e:
                write(f"Attribute query for object {oid} failed: {e}", warning=True)
                value = UNKNOWN_VALUE
            queries += 1
            node.attributes[constraint.name] = value
        return queries

    def co_observing_viewpoints(self, i, j):
        return sorted(
            v for v in self.viewpoints if (v, i) in self.edges_vo and (v, j) in self.edges_vo
        )

    def infer_relation_on_demand(self, i, j, rel, reasoner, *, live_obs=None, goal=None):
        """Decide `i <rel> j` from the views that observe both objects.

        Every co-observing viewpoint is asked once; a negative answer is
        remembered per viewpoint, so views added later are still queried.
        `live_obs` is used when no stored viewpoint observes both objects.

        Returns:
            True, False or UNDETERMINED
        """
        if rel in self.edges_oo.get((i, j), ()):
            return True
        tried = self._relation_cache.setdefault((i, j, rel), set())
        views = [
            (v, self.viewpoints[v].observation)
            for v in self.co_observing_viewpoints(i, j)
            if v not in tried
        ]
        if not views and not tried and live_obs is not None:
            seen = self.observation_objects(live_obs)
            if i in seen and j in seen:
                views = [("live", live_obs)]
        if not views:
            return False if tried else UNDETERMINED
        a, b = self.objects[i], self.objects[j]
        undetermined = False
        for vid, obs in views:
            ctx = RelationQueryContext(
                obs,
                (i, j),
                (frozenset(a.cells), frozenset(b.cells)),
                rel,
                (a.category, b.category),
                goal,
            )
            res = reasoner.decide(ctx)
            if res is True:
                self.edges_oo.setdefault((i, j), set()).add(rel)
                return True
            elif res is False or res == UNSUPPORTED:
                tried.add(vid)
            else:
                undetermined = True
        return UNDETERMINED if undetermined else False

    # --- Contexts ------------------------------------------------------------

    def room_info(self, room_id):
        room = self.rooms.get(room_id)
        return {
            "id": room_id,
            "category": room.category if room else UNLABELED,
            "objects": sorted({self.objects[o].category for o in self.objects_in_room(room_id)}),
        }

    def room_distances(self, pose, passable=None):
        """Path distance (meters) from `pose` to each room's territory."""
        if passable is None:
            passable = self.known == FREE
        field = grid_utils.distance_field(passable, self.cell_of(pose))
        res = {}
        for rid, room in self.rooms.items():
            d = field[room.territory]
            d = float(d.min()) if d.size else math.inf
            res[rid] = d * self.resolution if math.isfinite(d) else math.inf
        return res

    def build_context(self, mode, goal, *, pose=None, passable=None):
        """Return the reasoner context for an EarlyStop or RoomQuery mode."""
        if isinstance(mode, EarlyStop):
            return EarlyStopContext(
                self.room_info(mode.current), self.room_info(mode.new), goal
            )
        elif isinstance(mode, RoomQuery):
            dist = self.room_distances(pose, passable) if pose is not None else {}
            rooms = []
            for rid in sorted(mode.uncovered):
                info = self.room_info(rid)
                d = dist.get(rid, math.inf)
                info["distance"] = round(d, 3) if math.isfinite(d) else None
                rooms.append(info)
            return RoomQueryContext(rooms, list(self.room_visits), goal, mode.current)
        raise TypeError(f"Unknown context mode {mode!r}")

    # --- Export --------------------------------------------------------------

    def snapshot(self):
        """JSON-compatible dict of rooms, viewpoints, objects and edges."""
        return {
            "shape": list(self.shape),
            "resolution": self.resolution,
            "rooms": [
                {
                    "id": rid,
                    "category": room.category,
                    "best_view": room.best_view,
                    "cells": room.size,
                    "mask": _rle(room.mask),
                }
                for rid, room in sorted(self.rooms.items())
            ],
            "viewpoints": [
                {
                    "id": vid,
                    "position": [round(vp.position[0], 4), round(vp.position[1], 4)],
                    "cell": list(vp.cell),
                    "coverage": int(len(vp.coverage)),
                }
                for vid, vp in sorted(self.viewpoints.items())
            ],
            "objects": [
                {
                    "id": oid,
                    "category": node.category,
                    "confidence": round(node.confidence, 4),
                    "bbox": list(node.bbox),
                    "cells": [list(c) for c in sorted(node.cells)],
                    "best_view": node.best_view,
                    "attributes": dict(sorted(node.attributes.items())),
                }
                for oid, node in sorted(self.objects.items())
            ],
            "edges": {
                "r_r": [list(e) for e in sorted(self.edges_rr)],
                "r_v": [[r, v] for v, r in sorted(self.edges_rv.items())],
                "r_o": [[r, o] for o, r in sorted(self.edges_ro.items())],
                "v_o": [list(e) for e in sorted(self.edges_vo)],
                "o_o": [
                    [i, j, rel]
                    for (i, j), rels in sorted(self.edges_oo.items())
                    for rel in sorted(rels)
                ],
            },
        }
