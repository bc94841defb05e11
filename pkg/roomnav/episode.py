"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

Episode executor: sense, update the scene representation, decide, drive.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from roomnav import __version__
from roomnav.base_autonomy import EmbodimentProfile, REPLAN, follow, plan_local_path
from roomnav.config import merge_config
from roomnav.grid_utils import FREE, OCCUPIED
from roomnav.gridworld import AgentState, check_success, sense, shortest_path_len, step
from roomnav.in_room_explorer import compute_surface
from roomnav.navigators import make_navigator
from roomnav.reasoners import load_priors, make_reasoner
from roomnav.scene_rep import SceneRep
from roomnav.util import DEBUG_FLAGS, write

TRACE_FORMAT = 1
TRACE_KIND = "pyroomnav-trace"

#: Minimum displacement (meters) that counts as progress for stuck detection
PROGRESS_DISTANCE = 0.1


class TraceFormatError(ValueError):
    """Raised when a trace file cannot be parsed."""


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"Not JSON serializable: {type(obj).__name__}")


def _finite_or_none(v):
    return v if math.isfinite(v) else None


def surface_coverage(grid_map, covered):
    """Fraction of the map's wall-facing Free cells inside `covered`.

    Returns 1.0 for a map without such cells.
    """
    belief = np.where(grid_map.occupied, OCCUPIED, FREE).astype(np.int8)
    surface = compute_surface(belief, grid_map.rooms_gt >= 0).cells
    n = int(surface.sum())
    if not n:
        return 1.0
    return round(int((surface & covered).sum()) / n, 6)


# ===============================================================================
# EpisodeTrace
# ===============================================================================
class EpisodeTrace:
    """Event log of one episode, written as JSON lines.

    The first line is a header with the format version, the following lines
    are events `{"t", "pose", "event", ...}` with non-decreasing `t`.

    Args:
        spec (EpisodeSpec):
        enabled (bool): if False, `log()` is a no-op
    """

    def __init__(self, spec=None, *, enabled=True):
        self.enabled = enabled
        self.header = {
            "format": TRACE_FORMAT,
            "kind": TRACE_KIND,
            "version": __version__,
        }
        if spec is not None:
            self.header.update(
                episode=spec.id, map=spec.map_ref, goal=spec.goal.to_dict(), tier=spec.tier
            )
        self.events = []
        #: Source line of each event (files only)
        self.lines = []
        self.t = 0.0
        self.pose = None

    def __repr__(self):
        return f"EpisodeTrace<{self.header.get('episode')}, {len(self.events)} events>"

    def set_clock(self, state):
        self.t = state.elapsed
        self.pose = state.pose

    def log(self, event, **data):
        if not self.enabled:
            return
        rec = {"t": round(self.t, 6), "event": event}
        if self.pose is not None:
            rec["pose"] = [round(v, 6) for v in self.pose]
        rec.update(data)
        self.events.append(rec)

    def log_query(self, record):
        self.log(
            "query",
            variant=record.variant,
            payload=record.payload,
            decision=record.decision,
            **record.extra,
        )

    def trajectory(self):
        """Return the (x, y) poses of all `tick` events."""
        return [tuple(e["pose"][:2]) for e in self.events if e["event"] == "tick"]

    def line_of(self, index):
        """Return the file line of event `index`."""
        return self.lines[index] if self.lines else index + 2

    def find(self, event):
        return [e for e in self.events if e["event"] == event]

    def write(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(json.dumps(self.header, sort_keys=True, default=_json_default) + "\n")
            for e in self.events:
                f.write(json.dumps(e, sort_keys=True, default=_json_default) + "\n")

    @classmethod
    def read(cls, path):
        """Load a trace file; raise TraceFormatError naming the bad line."""
        trace = cls()
        last_t = -math.inf
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as e:
                    raise TraceFormatError(f"{path}:{lineno}: invalid JSON ({e.msg})") from e
                if not isinstance(rec, dict):
                    raise TraceFormatError(f"{path}:{lineno}: expected an object")
                if lineno == 1:
                    if rec.get("kind") != TRACE_KIND:
                        raise TraceFormatError(f"{path}:1: not a {TRACE_KIND} file")
                    if rec.get("format") != TRACE_FORMAT:
                        raise TraceFormatError(
                            "{}:1: unsupported trace format {!r} (expected {})".format(
                                path, rec.get("format"), TRACE_FORMAT
                            )
                        )
                    trace.header = rec
                    continue
                if "event" not in rec or "t" not in rec:
                    raise TraceFormatError(f"{path}:{lineno}: event without `event` or `t`")
                if rec["t"] < last_t:
                    raise TraceFormatError(f"{path}:{lineno}: timestamp goes backwards")
                last_t = rec["t"]
                trace.events.append(rec)
                trace.lines.append(lineno)
        if not trace.header.get("kind"):
            raise TraceFormatError(f"{path}: empty trace")
        return trace


# ===============================================================================
# EpisodeResult
# ===============================================================================
@dataclass
class EpisodeResult:
    id: str
    tier: str = ""
    navigator: str = ""
    profile: str = ""
    success: bool = False
    #: The navigator stopped believing it reached the goal
    declared: bool = False
    elapsed: float = 0.0
    traveled: float = 0.0
    #: Oracle shortest path length (meters), inf if infeasible
    shortest: float = math.inf
    timeout: float = 0.0
    room_visits: list = field(default_factory=list)
    reasoner_queries: int = 0
    #: 'success', 'declared', 'exhausted', 'timeout' or 'error'
    end_reason: str = ""
    error: str = ""
    stats: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["shortest"] = _finite_or_none(self.shortest)
        return d


# ===============================================================================
# Executor
# ===============================================================================
class EpisodeRunner:
    """Drive one navigator through one episode.

    Args:
        grid_map (GridMap):
        spec (EpisodeSpec):
        config (dict): effective configuration
        navigator (str): 'hierarchical' or 'flat'
        profile (EmbodimentProfile): default: `config.bench.profile`
        reasoner (BaseReasoner): default: `make_reasoner(config)`
        trace (bool): collect an EpisodeTrace
    """

    def __init__(
        self,
        grid_map,
        spec,
        config,
        *,
        navigator="hierarchical",
        profile=None,
        reasoner=None,
        trace=True,
    ):
        self.grid_map = grid_map
        self.spec = spec
        if config["world"]["resolution"] != grid_map.resolution:
            config = merge_config(config, {"world": {"resolution": grid_map.resolution}})
        self.config = config
        self.profile = profile or EmbodimentProfile.from_config(
            config, config["bench"]["profile"]
        )
        self.kind = navigator
        self.seed = spec.seed + int(config["bench"]["seed"])
        self.priors = load_priors(config)
        if reasoner is None and (navigator == "hierarchical" or spec.goal.constraints):
            reasoner = make_reasoner(config, grid_map, seed=self.seed, priors=self.priors)
        self.reasoner = reasoner
        self.trace = EpisodeTrace(spec, enabled=trace)
        self.timeout = spec.timeout * config["bench"]["timeout_scale"]
        self._stats = {
            "ticks": 0,
            "senses": 0,
            "local_plans": 0,
            "local_plan_failures": 0,
            "replans": 0,
            "blocked_steps": 0,
            "stuck": 0,
        }

    def __repr__(self):
        return f"EpisodeRunner<{self.spec.id}, {self.kind}, {self.profile.id}>"

    def _inc_stat(self, name, ofs=1):
        self._stats[name] = self._stats.get(name, 0) + ofs

    def get_stats(self):
        return dict(self._stats)

    def _plan(self, rep, nav, state, wp):
        if wp is None:
            return None
        self._inc_stat("local_plans")
        path = plan_local_path(
            rep.known, state.pose, wp, self.profile, rep.resolution, trav=nav.trav
        )
        if not path:
            self._inc_stat("local_plan_failures")
            self.trace.log("waypoint_failed", waypoint=list(wp), reason="no_path")
            nav.waypoint_failed(rep, wp)
            return None
        return path

    @staticmethod
    def _path_valid(path, trav):
        return all(trav[y, x] for x, y in path[1:])

    def run(self):
        """Run until the navigator stops or the timeout elapses.

        Returns:
            EpisodeResult
        """
        spec = self.spec
        gm = self.grid_map
        cfg = self.config
        world = cfg["world"]
        res = gm.resolution
        dt = world["dt"]
        sense_period = world["sense_period"]
        stuck_timeout = cfg["policy"]["stuck_timeout"]
        rules = self.priors.relations

        theta = spec.start[2] if len(spec.start) > 2 else 0.0
        state = AgentState(spec.start[0], spec.start[1], theta, self.profile.id)
        rep = SceneRep.from_config(gm.cells.shape, cfg)
        nav = make_navigator(
            self.kind,
            cfg,
            self.profile,
            res,
            spec.goal,
            reasoner=self.reasoner,
            seed=self.seed,
            trace=self.trace,
        )
        rng = np.random.default_rng(self.seed)
        shortest = shortest_path_len(gm, spec.start, spec.goal, world["success_distance"], rules)

        self.trace.set_clock(state)
        self.trace.log("start", navigator=self.kind, profile=self.profile.id, timeout=self.timeout)

        next_sense = 0.0
        force_sense = True
        path = None
        path_wp = None
        progress = (state.elapsed, state.x, state.y)
        end_reason = "timeout"

        while state.elapsed < self.timeout - 1e-9:
            if force_sense or state.elapsed >= next_sense - 1e-9:
                obs = sense(
                    gm,
                    state.pose,
                    self.profile,
                    rng=rng,
                    p_fn=world["p_fn"],
                    confidence=(world["confidence_min"], world["confidence_max"]),
                )
                self._inc_stat("senses")
                rep.integrate_observation(obs)
                rep.maybe_add_viewpoint(state.pose, obs)
                rep.segment_rooms()
                rep.note_room_visit(state.pose)
                self.trace.set_clock(state)
                if rep.new_room_ids:
                    self.trace.log("rooms", added=list(rep.new_room_ids))
                wps = nav.tick(rep, obs, state)
                self._inc_stat("ticks")
                self.trace.log("tick", waypoints=[list(w) for w in wps[:1]])
                next_sense = state.elapsed + sense_period
                force_sense = False
                if nav.finished:
                    end_reason = "declared" if nav.declared_success else "exhausted"
                    break
                wp = wps[0] if wps else None
                if wp != path_wp or path is None or not self._path_valid(path, nav.trav):
                    if wp == path_wp and path is not None:
                        self._inc_stat("replans")
                    path = self._plan(rep, nav, state, wp)
                    path_wp = wp if path is not None else None
                    progress = (state.elapsed, state.x, state.y)

            cmd = (0.0, 0.0)
            if path is not None:
                cmd = follow(
                    path,
                    state,
                    self.profile,
                    res,
                    belief=rep.known,
                    params=cfg["autonomy"],
                    dt=dt,
                )
                if cmd is REPLAN:
                    self._inc_stat("replans")
                    path = self._plan(rep, nav, state, path_wp)
                    path_wp = path_wp if path is not None else None
                    cmd = (0.0, 0.0)
                elif cmd == (0.0, 0.0):
                    # Arrived: decide on fresh data right away
                    path = None
                    force_sense = True

            state, blocked = step(state, cmd, dt, gm, self.profile)
            if blocked:
                self._inc_stat("blocked_steps")
                # Re-plan from the current cell on the next cycle
                path = None
                path_wp = None

            if path_wp is None:
                progress = (state.elapsed, state.x, state.y)
            elif math.hypot(state.x - progress[1], state.y - progress[2]) >= PROGRESS_DISTANCE:
                progress = (state.elapsed, state.x, state.y)
            elif state.elapsed - progress[0] > stuck_timeout:
                self._inc_stat("stuck")
                self.trace.set_clock(state)
                self.trace.log("waypoint_failed", waypoint=list(path_wp), reason="stuck")
                nav.waypoint_failed(rep, path_wp)
                path = None
                path_wp = None
                force_sense = True
                progress = (state.elapsed, state.x, state.y)

        reached = check_success(state.pose, spec.goal, gm, world["success_distance"], rules)
        success = nav.declared_success and reached
        if success:
            end_reason = "success"
        nav_stats = nav.get_stats()
        stats = self.get_stats()
        stats.update(nav_stats)
        stats["viewpoints"] = len(rep.viewpoints)
        stats["rooms_seen"] = len(rep.rooms)
        stats["surface_coverage"] = surface_coverage(gm, rep.covered)
        stats["reached_goal_region"] = bool(reached)

        result = EpisodeResult(
            id=spec.id,
            tier=spec.tier,
            navigator=self.kind,
            profile=self.profile.id,
            success=success,
            declared=nav.declared_success,
            elapsed=round(state.elapsed, 6),
            traveled=round(state.traveled, 6),
            shortest=shortest,
            timeout=self.timeout,
            room_visits=list(rep.room_visits),
            reasoner_queries=nav_stats.get("reasoner_queries", 0),
            end_reason=end_reason,
            stats=stats,
        )
        self.trace.set_clock(state)
        self.trace.log("scene", **rep.snapshot())
        self.trace.log("result", **result.to_dict())
        if "episode" in DEBUG_FLAGS:
            write(f"{self}: {end_reason} after {state.elapsed:.1f}s, {stats}", debug=True)
        self.rep = rep
        self.navigator = nav
        self.final_state = state
        return result


def run_episode(
    grid_map, spec, config, *, navigator="hierarchical", profile=None, reasoner=None, trace=True
):
    """Run one episode.

    Returns:
        (EpisodeResult, EpisodeTrace)
    """
    runner = EpisodeRunner(
        grid_map,
        spec,
        config,
        navigator=navigator,
        profile=profile,
        reasoner=reasoner,
        trace=trace,
    )
    result = runner.run()
    return result, runner.trace
