"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

Decision layer: the room-based hierarchical navigator and the flat frontier
baseline. Both emit waypoint cells for the low-level executor.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from roomnav import grid_utils
from roomnav.base_autonomy import traversable_grid
from roomnav.frontier import FrontierExplorer, nearest_reachable
from roomnav.grid_utils import FREE
from roomnav.in_room_explorer import PlannerParams, RoomExplorer
from roomnav.reasoners import EXHAUSTED, UNKNOWN, UNLABELED, QueryRecord
from roomnav.scene_rep import UNDETERMINED, EarlyStop, RoomQuery
from roomnav.util import DEBUG_FLAGS, write, write_error

UNVISITED = "unvisited"
PARTIAL = "partial"
COVERED = "covered"

VERIFIED = "verified"
REJECTED = "rejected"

#: Ticks a new room may wait for a label before the early-stop query
NEW_ROOM_LABEL_WAIT = 4
#: Failed approach targets before a candidate is set aside
MAX_APPROACH_FAILURES = 3


# ===============================================================================
# Phases
# ===============================================================================
@dataclass(frozen=True)
class ExploringRoom:
    room: int
    name = "exploring_room"


@dataclass(frozen=True)
class Transit:
    room: int
    target: tuple = None
    name = "transit"


@dataclass(frozen=True)
class Verifying:
    obj: int
    seek: tuple = None
    name = "verifying"


@dataclass(frozen=True)
class Approaching:
    obj: int
    target: tuple = None
    name = "approaching"


@dataclass(frozen=True)
class Done:
    success: bool
    name = "done"


@dataclass(frozen=True)
class Exhausted:
    name = "exhausted"


@dataclass(frozen=True)
class FrontierSweep:
    name = "frontier_sweep"


def phase_to_dict(phase):
    if phase is None:
        return {"phase": None}
    d = {"phase": phase.name}
    for k, v in asdict(phase).items():
        d[k] = list(v) if isinstance(v, tuple) else v
    return d


@dataclass
class NavState:
    phase: object = None
    #: room id -> UNVISITED / PARTIAL / COVERED
    room_status: dict = field(default_factory=dict)
    #: (from room, to room) pairs already queried
    early_stop_history: set = field(default_factory=set)
    #: Phase to resume after a verification detour
    resume: object = None
    rejected: set = field(default_factory=set)
    #: object id -> scene state key at deferral
    deferred: dict = field(default_factory=dict)
    #: room id -> belief version it was found unreachable at
    unreachable: dict = field(default_factory=dict)

    @property
    def uncovered_rooms(self):
        return sorted(r for r, s in self.room_status.items() if s != COVERED)


class QueryCounter:
    """Reasoner proxy that counts and traces queries and absorbs failures."""

    STAT_NAMES = {
        "early_stop": "early_stop_queries",
        "room_query": "room_queries",
        "room_label": "room_label_queries",
        "attribute": "attribute_queries",
        "relation": "relation_queries",
    }

    def __init__(self, reasoner, stats, trace=None):
        self.reasoner = reasoner
        self.stats = stats
        self.trace = trace

    def decide(self, ctx):
        self.stats["reasoner_queries"] += 1
        self.stats[self.STAT_NAMES[ctx.variant]] += 1
        try:
            decision = self.reasoner.decide(ctx)
        except Exception as e:
            decision = self.reasoner.fallback(ctx)
            write_error(f"Reasoner {ctx.variant} query failed ({e!r}); using {decision!r}")
        if self.trace is not None:
            self.trace.log_query(QueryRecord(ctx.variant, ctx.to_payload(), decision))
        return decision


# ===============================================================================
# BaseNavigator
# ===============================================================================
class BaseNavigator:
    """Shared bookkeeping: traversability, approach and success checks.

    Args:
        config (dict): effective configuration
        profile (EmbodimentProfile):
        resolution (float):
        goal (Goal):
        reasoner (BaseReasoner): None for reasoner-free navigators
        seed (int):
        trace (EpisodeTrace):
    """

    kind = None

    def __init__(self, config, profile, resolution, goal, *, reasoner=None, seed=0, trace=None):
        self.config = config
        self.profile = profile
        self.resolution = resolution
        self.goal = goal
        self.seed = seed
        self.trace = trace
        self.margin = config["autonomy"]["clearance_margin"]
        self.success_distance = config["world"]["success_distance"]
        self.approach_factor = config["policy"]["approach_factor"]
        self.nav = NavState()
        self.frontier = FrontierExplorer(resolution, reach=config["policy"]["frontier_reach"])
        self._stats = {
            "reasoner_queries": 0,
            "early_stop_queries": 0,
            "room_queries": 0,
            "room_label_queries": 0,
            "attribute_queries": 0,
            "relation_queries": 0,
            "planning_cycles": 0,
            "phase_changes": 0,
        }
        self.reasoner = QueryCounter(reasoner, self._stats, trace) if reasoner else None
        self.cell = None
        self.pose = None
        self.waypoint = None
        self.trav = None
        self.field = None
        self.reachable = None
        self._trav_version = None
        self._approach_failures = {}
        self._banned_targets = set()

    def __repr__(self):
        return f"{self.__class__.__name__}<{phase_to_dict(self.nav.phase)}>"

    def _inc_stat(self, name, ofs=1):
        self._stats[name] = self._stats.get(name, 0) + ofs

    def get_stats(self):
        return dict(self._stats)

    @property
    def finished(self):
        return isinstance(self.nav.phase, (Done, Exhausted))

    @property
    def declared_success(self):
        return isinstance(self.nav.phase, Done) and self.nav.phase.success

    def set_phase(self, phase, reason=""):
        prev = self.nav.phase
        if phase == prev:
            return
        self.nav.phase = phase
        self._inc_stat("phase_changes")
        if self.trace is not None:
            self.trace.log("phase", reason=reason, **phase_to_dict(phase))
        if "policy" in DEBUG_FLAGS:
            write(f"{phase_to_dict(prev)} -> {phase_to_dict(phase)} ({reason})", debug=True)

    def refresh(self, rep, pose):
        """Update traversability and the distance field from the robot."""
        self.pose = pose
        self.cell = rep.cell_of(pose)
        if self._trav_version != rep.version:
            self.trav = traversable_grid(rep.known, self.profile, self.resolution, self.margin)
            self._graph = grid_utils.grid_graph(self.trav)
            self._trav_version = rep.version
        self.field = grid_utils.distance_fields(self.trav, [self.cell], graph=self._graph)[0]
        self.reachable = np.isfinite(self.field)

    # --- Executor feedback ---

    def tick(self, rep, obs, state):
        """Advance the decision layer by one sensing cycle.

        Returns:
            list of waypoint cells (empty when stopped)
        """
        self.refresh(rep, state.pose)
        if self.waypoint is not None and self.waypoint == self.cell:
            self.on_arrival(rep, self.waypoint)
        if self.finished:
            self.waypoint = None
            return []
        wps = self.decide(rep, obs) or []
        self.waypoint = wps[0] if wps else None
        return wps

    def decide(self, rep, obs):
        raise NotImplementedError

    def on_arrival(self, rep, cell):
        phase = self.nav.phase
        if isinstance(phase, FrontierSweep):
            self.frontier.mark_reached(cell)

    def waypoint_failed(self, rep, cell):
        """The executor could not reach `cell`."""
        phase = self.nav.phase
        if isinstance(phase, FrontierSweep):
            self.frontier.mark_failed(cell)
        elif isinstance(phase, Approaching):
            self._banned_targets.add(cell)
            self.set_phase(Approaching(phase.obj), "approach target unreachable")
        self.waypoint = None

    # --- Approach ---

    def _footprint_near(self, node, radius):
        mask = grid_utils.mask_of(node.cells, self.trav.shape)
        st = grid_utils.disk_structure(radius)
        return ndimage.binary_dilation(mask, structure=st)

    def approach_cell(self, rep, node):
        """Reachable cell within reach of `node` with line of sight to it.

        Tries half the success distance first, then relaxes.
        """
        blocked = rep.known != FREE
        cells = sorted(node.cells)
        for factor in (self.approach_factor, 0.75, 0.95):
            r = factor * self.success_distance / self.resolution
            cand = self._footprint_near(node, r) & self.reachable
            for c in self._banned_targets:
                cand[c[1], c[0]] = False
            ys, xs = np.nonzero(cand)
            if not len(ys):
                continue
            order = np.lexsort((ys * cand.shape[1] + xs, self.field[ys, xs]))
            for k in order[:64].tolist():
                c = (int(xs[k]), int(ys[k]))
                for f in cells:
                    if (c[0] - f[0]) ** 2 + (c[1] - f[1]) ** 2 > r * r:
                        continue
                    if grid_utils.line_of_sight(blocked, c, f):
                        return c
        return None

    def believes_success(self, rep, node, pose):
        """Success check against the belief: a footprint cell within reach and in view."""
        blocked = rep.known != FREE
        origin = rep.cell_of(pose)
        res = self.resolution
        for cell in sorted(node.cells):
            cx, cy = (cell[0] + 0.5) * res, (cell[1] + 0.5) * res
            if math.hypot(cx - pose[0], cy - pose[1]) > self.success_distance + 1e-9:
                continue
            if cell == origin or grid_utils.line_of_sight(blocked, origin, cell):
                return True
        return False

    def tick_approach(self, rep):
        phase = self.nav.phase
        oid = rep.resolve_object(phase.obj)
        if oid is None:
            return self.resume("approached object vanished")
        node = rep.objects[oid]
        if self.believes_success(rep, node, self.pose):
            self.set_phase(Done(True), f"object {oid} in reach")
            return []
        target = phase.target
        if target is not None and target == self.cell:
            # Arrived without success: try another cell
            self._banned_targets.add(target)
            self._approach_failures[oid] = self._approach_failures.get(oid, 0) + 1
            target = None
        if target is not None and not self.reachable[target[1], target[0]]:
            target = None
        if target is None:
            if self._approach_failures.get(oid, 0) >= MAX_APPROACH_FAILURES:
                self.defer(rep, oid)
                return self.resume(f"cannot approach object {oid}")
            target = self.approach_cell(rep, node)
            if target is None:
                self.defer(rep, oid)
                return self.resume(f"no approach cell for object {oid}")
            self.set_phase(Approaching(oid, target), "approach target")
        return [target]

    def defer(self, rep, oid):
        self.nav.deferred[oid] = (rep.object_updates, len(rep.viewpoints))

    def is_deferred(self, rep, oid):
        key = self.nav.deferred.get(oid)
        return key is not None and key == (rep.object_updates, len(rep.viewpoints))

    def resume(self, reason):
        phase = self.nav.resume or FrontierSweep()
        self.nav.resume = None
        self.set_phase(phase, reason)
        return None

    def frontier_target(self, rep):
        return self.frontier.next_target(rep.known, self.reachable, self.field)

    def target_candidates(self, rep):
        """Unrejected target-category nodes, nearest first."""
        res = []
        for oid, node in rep.objects.items():
            if node.category != self.goal.category or oid in self.nav.rejected:
                continue
            if self.is_deferred(rep, oid):
                continue
            cx, cy = node.centroid
            d = math.hypot(cx - self.cell[0], cy - self.cell[1])
            res.append((d, oid))
        return [oid for _d, oid in sorted(res)]

    # --- Goal constraints ---

    def check_constraints(self, rep, obs, oid):
        """Check the goal constraints of object `oid` against the belief.

        Room labels, attributes and relations come from the scene
        representation and the reasoner, never from ground truth.

        Returns:
            (verdict, detail): ``(VERIFIED, None)``, ``(REJECTED, reason)`` or
            ``(UNDETERMINED, partner ids without a co-observing view)``
        """
        goal = self.goal
        if not goal.constraints:
            return VERIFIED, None
        node = rep.objects[oid]
        undetermined = False
        for c in goal.room_constraints:
            rid = rep.edges_ro.get(oid)
            label = rep.rooms[rid].category if rid in rep.rooms else UNLABELED
            if label == UNLABELED:
                undetermined = True
            elif label != c.room:
                return REJECTED, f"in {label}, not {c.room}"
        for c in goal.attr_constraints:
            rep.infer_attribute_on_demand(node.category, c, self.reasoner, goal)
            value = node.attributes.get(c.name, UNKNOWN)
            if value == UNKNOWN:
                undetermined = True
            elif value != c.value:
                return REJECTED, f"{c.name}={value}, not {c.value}"
        open_pairs = []
        for c in goal.relation_constraints:
            others = sorted(
                j for j, o in rep.objects.items() if o.category == c.other and j != oid
            )
            satisfied = False
            for j in others:
                res = rep.infer_relation_on_demand(
                    oid, j, c.rel, self.reasoner, live_obs=obs, goal=goal
                )
                if res is True:
                    satisfied = True
                    break
                elif res == UNDETERMINED:
                    open_pairs.append(j)
            if not satisfied:
                # Unseen partners may still satisfy the relation later
                undetermined = True
        if undetermined:
            return UNDETERMINED, open_pairs
        return VERIFIED, None

    def log_verification(self, oid, result, **kw):
        if self.trace is not None:
            self.trace.log("verification", obj=oid, result=result, **kw)

    def reject(self, oid, why):
        self.nav.rejected.add(oid)
        self.log_verification(oid, REJECTED, reason=why)
        write(f"Rejected object {oid}: {why}", debug=True)


# ===============================================================================
# FlatNavigator
# ===============================================================================
class FlatNavigator(BaseNavigator):
    """Nearest-frontier baseline without rooms.

    Candidates of the target category are checked against the goal
    constraints from the current belief only; no views are sought. A
    reasoner is needed only for constrained goals.
    """

    kind = "flat"

    def __init__(self, config, profile, resolution, goal, *, reasoner=None, seed=0, trace=None):
        if reasoner is None and goal.constraints:
            raise ValueError("FlatNavigator needs a reasoner for constrained goals")
        super().__init__(
            config, profile, resolution, goal, reasoner=reasoner, seed=seed, trace=trace
        )

    def _pick_candidate(self, rep, obs):
        if self.goal.room_constraints:
            rep.update_room_labels(self.reasoner)
        for oid in self.target_candidates(rep):
            verdict, detail = self.check_constraints(rep, obs, oid)
            if verdict == VERIFIED:
                self.log_verification(oid, VERIFIED)
                return oid
            elif verdict == REJECTED:
                self.reject(oid, detail)
            else:
                self.defer(rep, oid)
                self.log_verification(oid, UNDETERMINED)
        return None

    def decide(self, rep, obs):
        phase = self.nav.phase
        if not isinstance(phase, Approaching):
            oid = self._pick_candidate(rep, obs)
            if oid is not None:
                self.nav.resume = FrontierSweep()
                self.set_phase(Approaching(oid), "target detected")
                phase = self.nav.phase
        if isinstance(phase, Approaching):
            wps = self.tick_approach(rep)
            if wps is not None:
                return wps
        target = self.frontier_target(rep)
        if target is None:
            self.set_phase(Exhausted(), "no frontier left")
            return []
        if not isinstance(self.nav.phase, FrontierSweep):
            self.set_phase(FrontierSweep(), "explore")
        return [target]


# ===============================================================================
# HierarchicalNavigator
# ===============================================================================
class HierarchicalNavigator(BaseNavigator):
    """Room-level search with early stop, room queries and goal verification."""

    kind = "hierarchical"

    def __init__(self, config, profile, resolution, goal, *, reasoner, seed=0, trace=None):
        if reasoner is None:
            raise ValueError("HierarchicalNavigator needs a reasoner")
        super().__init__(
            config, profile, resolution, goal, reasoner=reasoner, seed=seed, trace=trace
        )
        self.params = PlannerParams.from_config(config, seed)
        self.exhausted_mode = config["policy"]["exhausted"]
        self.explorers = {}
        #: new room id -> ticks waited for a label
        self.pending_new = {}
        self.seek_attempted = set()

    def get_stats(self):
        stats = super().get_stats()
        stats["planning_cycles"] = sum(ex.cycles for ex in self.explorers.values())
        return stats

    # --- Rooms ---

    def _sync_rooms(self, rep):
        for rid in rep.new_room_ids:
            if rid not in self.nav.room_status:
                self.pending_new[rid] = 0
        for rid in rep.rooms:
            self.nav.room_status.setdefault(rid, UNVISITED)
        rep.update_room_labels(self.reasoner)

    def _room_entry(self, rep, rid):
        room = rep.rooms.get(rid)
        if room is None:
            return None
        return nearest_reachable(room.territory & self.reachable, self.field)

    def _selectable(self, rep, current=None):
        res = []
        for rid in self.nav.uncovered_rooms:
            if rid not in rep.rooms or rid == current:
                continue
            if self.nav.unreachable.get(rid) == rep.version:
                continue
            res.append(rid)
        return res

    def select_room(self, rep, current=None):
        """Room query over the uncovered rooms; unreachable picks are re-queried.

        Returns:
            room id or EXHAUSTED
        """
        while True:
            uncovered = self._selectable(rep, current)
            if not uncovered:
                return EXHAUSTED
            ctx = rep.build_context(
                RoomQuery(tuple(uncovered), current), self.goal, pose=self.pose, passable=self.trav
            )
            choice = self.reasoner.decide(ctx)
            if choice == EXHAUSTED:
                return EXHAUSTED
            if choice not in uncovered:
                write_error(f"Room query returned {choice!r}, not an uncovered room")
                choice = self.reasoner.reasoner.nearest_room(ctx)
            if self._room_entry(rep, choice) is None:
                self.nav.unreachable[choice] = rep.version
                write(f"Room {choice} is unreachable in belief, re-querying", debug=True)
                continue
            if self.trace is not None:
                self.trace.log("room_selected", room=choice, uncovered=uncovered)
            return choice

    def on_new_room(self, rep, new_room):
        """Early-stop decision for a newly discovered room."""
        cur = self.nav.phase.room
        pair = (cur, new_room)
        if pair in self.nav.early_stop_history or new_room == cur:
            return False
        self.nav.early_stop_history.add(pair)
        ctx = rep.build_context(EarlyStop(cur, new_room), self.goal)
        switch = self.reasoner.decide(ctx) is True
        if self.trace is not None:
            self.trace.log("early_stop", current=cur, new=new_room, switch=switch)
        if not switch:
            return False
        if self._room_entry(rep, new_room) is None:
            write(f"Early stop to room {new_room} skipped: unreachable", debug=True)
            return False
        self.nav.room_status[cur] = PARTIAL
        self.set_phase(Transit(new_room), f"early stop {cur} -> {new_room}")
        return True

    def on_room_covered(self, rep):
        phase = self.nav.phase
        current = None
        if isinstance(phase, ExploringRoom):
            current = phase.room
            self.nav.room_status[current] = COVERED
            if self.trace is not None:
                self.trace.log("room_covered", room=current)
        choice = self.select_room(rep, current)
        if choice == EXHAUSTED:
            return self._exhausted()
        self.set_phase(Transit(choice), "room query")
        return self.tick_transit(rep)

    def _exhausted(self):
        if self.exhausted_mode == "resweep":
            self.set_phase(FrontierSweep(), "rooms exhausted, sweeping frontiers")
        else:
            self.set_phase(Exhausted(), "rooms exhausted")
        return None

    # --- Verification ---

    def _co_observation_cell(self, rep, i, j):
        """Nearest reachable cell that sees both objects in belief."""
        r = 0.9 * self.profile.sensor_range / self.resolution
        blocked = rep.known != FREE
        vis = self.reachable.copy()
        for oid in (i, j):
            node = rep.objects[oid]
            own = grid_utils.mask_of(node.cells, blocked.shape)
            cx, cy = node.centroid
            origin = (int(round(cx)), int(round(cy)))
            vis &= grid_utils.visible_mask(blocked & ~own, origin, r)
        return nearest_reachable(vis, self.field)

    def on_candidate_target(self, rep, obs, oid):
        """Check the goal constraints for object `oid`.

        Returns:
            waypoint list, or None if the previous activity resumes
        """
        verdict, detail = self.check_constraints(rep, obs, oid)
        if verdict == REJECTED:
            self.reject(oid, detail)
            return self.resume(f"object {oid} rejected")
        if verdict == UNDETERMINED:
            for j in detail:
                if (oid, j) in self.seek_attempted:
                    continue
                self.seek_attempted.add((oid, j))
                seek = self._co_observation_cell(rep, oid, j)
                if seek is not None:
                    self.set_phase(Verifying(oid, seek), f"seek view of {oid} and {j}")
                    return [seek]
            self.defer(rep, oid)
            self.log_verification(oid, UNDETERMINED)
            return self.resume(f"object {oid} undetermined")
        self.log_verification(oid, VERIFIED)
        self.set_phase(Approaching(oid), f"object {oid} verified")
        return self.tick_approach(rep)

    # --- Phase handlers ---

    def on_arrival(self, rep, cell):
        phase = self.nav.phase
        if isinstance(phase, ExploringRoom):
            ex = self.explorers.get(phase.room)
            if ex is not None and ex.next_site() == cell:
                ex.site_reached(cell)
        else:
            super().on_arrival(rep, cell)

    def waypoint_failed(self, rep, cell):
        phase = self.nav.phase
        if isinstance(phase, ExploringRoom):
            ex = self.explorers.get(phase.room)
            if ex is not None:
                ex.site_failed(cell)
            self.waypoint = None
        elif isinstance(phase, Transit):
            self.nav.unreachable[phase.room] = rep.version
            self.waypoint = None
            self.on_room_covered_without_marking(rep)
        elif isinstance(phase, Verifying):
            self.defer(rep, phase.obj)
            self.waypoint = None
            self.resume("co-observation view unreachable")
        else:
            super().waypoint_failed(rep, cell)

    def on_room_covered_without_marking(self, rep):
        choice = self.select_room(rep)
        if choice == EXHAUSTED:
            self._exhausted()
        else:
            self.set_phase(Transit(choice), "re-query after unreachable room")

    def tick_exploring(self, rep):
        rid = self.nav.phase.room
        if rid not in rep.rooms:
            self.nav.room_status.pop(rid, None)
            return self.on_room_covered(rep)
        ex = self.explorers.get(rid)
        if ex is None:
            ex = self.explorers[rid] = RoomExplorer(rid, self.params, self.resolution)
        site = ex.update(rep, self.pose, self.trav, self.reachable)
        if site is None:
            return self.on_room_covered(rep)
        return ex.plan.local_tour + ex.plan.global_tour

    def tick_transit(self, rep):
        rid = self.nav.phase.room
        if rid not in rep.rooms or self.nav.room_status.get(rid) == COVERED:
            return self.on_room_covered(rep)
        if rep.room_at(self.cell) == rid:
            self.nav.room_status[rid] = PARTIAL
            self.set_phase(ExploringRoom(rid), "entered room")
            return self.tick_exploring(rep)
        entry = self._room_entry(rep, rid)
        if entry is None:
            self.nav.unreachable[rid] = rep.version
            return self.on_room_covered(rep)
        if entry != self.nav.phase.target:
            self.nav.phase = Transit(rid, entry)
        return [entry]

    def tick_sweep(self, rep):
        if any(s == UNVISITED for r, s in self.nav.room_status.items() if r in rep.rooms):
            choice = self.select_room(rep)
            if choice != EXHAUSTED:
                self.set_phase(Transit(choice), "room found while sweeping")
                return self.tick_transit(rep)
        cur = rep.room_at(self.cell)
        if cur is not None and self.nav.room_status.get(cur) != COVERED:
            self.nav.room_status[cur] = PARTIAL
            self.set_phase(ExploringRoom(cur), "inside an uncovered room")
            return self.tick_exploring(rep)
        target = self.frontier_target(rep)
        if target is None:
            self.set_phase(Exhausted(), "no frontier left")
            return []
        return [target]

    def _process_new_rooms(self, rep):
        for rid in sorted(self.pending_new):
            if not isinstance(self.nav.phase, ExploringRoom):
                return
            waited = self.pending_new[rid]
            room = rep.rooms.get(rid)
            if room is None or self.nav.room_status.get(rid) != UNVISITED:
                del self.pending_new[rid]
                continue
            if room.category == UNLABELED and waited < NEW_ROOM_LABEL_WAIT:
                self.pending_new[rid] = waited + 1
                continue
            del self.pending_new[rid]
            if self.on_new_room(rep, rid):
                return

    def decide(self, rep, obs):
        self._sync_rooms(rep)
        phase = self.nav.phase
        if phase is None:
            cur = rep.room_at(self.cell)
            if cur is not None:
                self.nav.room_status[cur] = PARTIAL
                self.set_phase(ExploringRoom(cur), "start")
            else:
                self.set_phase(FrontierSweep(), "start")
            phase = self.nav.phase

        # Verification preempts exploration and transit
        if not isinstance(phase, (Verifying, Approaching)):
            cands = self.target_candidates(rep)
            if cands:
                self.nav.resume = phase
                self.set_phase(Verifying(cands[0]), "target category detected")
                phase = self.nav.phase

        if isinstance(phase, Verifying):
            oid = rep.resolve_object(phase.obj)
            if oid is None:
                self.resume("verified object vanished")
            elif phase.seek is not None and phase.seek != self.cell:
                if self.reachable[phase.seek[1], phase.seek[0]]:
                    return [phase.seek]
                self.defer(rep, oid)
                self.resume("co-observation view unreachable")
            else:
                wps = self.on_candidate_target(rep, obs, oid)
                if wps is not None:
                    return wps
            phase = self.nav.phase

        if isinstance(phase, Approaching):
            wps = self.tick_approach(rep)
            if wps is not None:
                return wps
            phase = self.nav.phase

        if isinstance(phase, ExploringRoom):
            self._process_new_rooms(rep)
            phase = self.nav.phase
        if isinstance(phase, ExploringRoom):
            return self.tick_exploring(rep)
        elif isinstance(phase, Transit):
            return self.tick_transit(rep)
        elif isinstance(phase, FrontierSweep):
            return self.tick_sweep(rep)
        return []


NAVIGATORS = {
    "hierarchical": HierarchicalNavigator,
    "flat": FlatNavigator,
}


def make_navigator(kind, config, profile, resolution, goal, *, reasoner=None, seed=0, trace=None):
    """Factory that returns a navigator for `kind` ('hierarchical' or 'flat')."""
    try:
        cls = NAVIGATORS[kind]
    except KeyError:
        raise ValueError(f"Unknown navigator {kind!r}") from None
    if cls is FlatNavigator and not goal.constraints:
        reasoner = None
    return cls(config, profile, resolution, goal, reasoner=reasoner, seed=seed, trace=trace)
