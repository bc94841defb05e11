"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

In-room coverage exploration: surface extraction, pose-candidate scoring,
stochastic candidate selection, multi-restart open-tour TSP and the rolling
local / global planning window.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from roomnav import grid_utils
from roomnav.config import planner_spacing
from roomnav.grid_utils import FREE
from roomnav.util import DEBUG_FLAGS, write

_CROSS = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class PlannerParams:
    """
    Attributes:
        d_cover (float): coverage radius (meters)
        delta (int): minimum coverage score (cells)
        restarts (int): K
        window (float): rolling window side (meters)
        spacing (float): candidate lattice spacing (meters)
        jitter (float): lattice jitter (cells)
        seed (int):
    """

    d_cover: float = 3.0
    delta: int = 3
    restarts: int = 8
    window: float = 8.0
    spacing: float = 1.5
    jitter: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        for name in ("d_cover", "restarts", "window", "spacing"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_config(cls, config, seed=0):
        pc = config["planner"]
        return cls(
            d_cover=config["scene"]["d_cover"],
            delta=int(pc["delta"]),
            restarts=int(pc["restarts"]),
            window=float(pc["window"]),
            spacing=float(planner_spacing(config)),
            jitter=float(pc["jitter"]),
            seed=int(seed),
        )


@dataclass
class SurfaceSet:
    #: Known-Free cells bordering non-Free space (bool grid)
    cells: np.ndarray
    #: Still uncovered subset
    uncovered: np.ndarray

    def __len__(self):
        return int(self.cells.sum())


@dataclass
class LocalHorizon:
    #: Window center (meters)
    center: tuple
    window: float
    candidates: list = field(default_factory=list)
    traversable: list = field(default_factory=list)

    def contains(self, cell, resolution):
        half = self.window / 2.0
        cx = (cell[0] + 0.5) * resolution
        cy = (cell[1] + 0.5) * resolution
        return abs(cx - self.center[0]) <= half and abs(cy - self.center[1]) <= half


@dataclass
class ExplorationPlan:
    local_tour: list = field(default_factory=list)
    global_sites: list = field(default_factory=list)
    global_tour: list = field(default_factory=list)
    waypoints: list = field(default_factory=list)
    cost: float = 0.0
    #: Window center of the last planning cycle (meters)
    center: tuple = None
    #: Uncovered surface size after each selection draw
    uncovered_trace: list = field(default_factory=list)

    def to_dict(self):
        return {
            "local_tour": [list(c) for c in self.local_tour],
            "global_sites": [list(c) for c in self.global_sites],
            "global_tour": [list(c) for c in self.global_tour],
            "cost": round(self.cost, 4),
            "uncovered_trace": list(self.uncovered_trace),
        }


# ===============================================================================
# Surface and coverage
# ===============================================================================
def compute_surface(belief, room_mask, *, covered=None):
    """Surface cells of a room and their uncovered subset.

    Args:
        belief (np.ndarray[int8]):
        room_mask (np.ndarray[bool]):
        covered (np.ndarray[bool]): cells already covered from visited poses
    """
    free = belief == FREE
    near_nonfree = ndimage.binary_dilation(~free, structure=_CROSS, border_value=1)
    cells = free & room_mask & near_nonfree
    uncovered = cells & ~covered if covered is not None else cells.copy()
    return SurfaceSet(cells, uncovered)


def coverage_of(candidate, surface, d_cover_cells, belief):
    """Surface cells closer than `d_cover_cells` with line of sight in belief.

    Unknown and Occupied cells block the line of sight.

    Returns:
        bool grid
    """
    if isinstance(surface, SurfaceSet):
        surface = surface.cells
    if d_cover_cells <= 0:
        return np.zeros(surface.shape, dtype=bool)
    vis = grid_utils.visible_mask(belief != FREE, candidate, d_cover_cells, strict=True)
    return vis & surface


def select_candidates(covers, uncovered, delta, rng):
    """Draw candidates with probability proportional to their coverage score.

    Only candidates scoring at least `delta` take part in a draw; the loop
    ends when no candidate does.

    Args:
        covers (list[np.ndarray]): flat surface indices each candidate covers
        uncovered (np.ndarray[bool]): flat or 2D uncovered surface
        delta (int):
        rng (np.random.Generator):
    Returns:
        (selected indices in draw order, remaining uncovered (flat), trace of
        remaining uncovered counts)
    """
    unc = np.asarray(uncovered, dtype=bool).ravel().copy()
    selected = []
    trace = [int(unc.sum())]
    while covers:
        scores = np.array([int(unc[c].sum()) for c in covers], dtype=float)
        eligible = scores >= delta
        if not eligible.any():
            break
        weights = np.where(eligible, scores, 0.0)
        i = int(rng.choice(len(covers), p=weights / weights.sum()))
        selected.append(i)
        unc[covers[i]] = False
        trace.append(int(unc.sum()))
    return selected, unc, trace


def max_score(covers, uncovered):
    unc = np.asarray(uncovered, dtype=bool).ravel()
    if not covers:
        return 0
    return max(int(unc[c].sum()) for c in covers)


def is_room_covered(surface, delta, covers, *, pending=()):
    """True iff no candidate scores `delta` and no tour site is pending."""
    if pending:
        return False
    unc = surface.uncovered if isinstance(surface, SurfaceSet) else surface
    return max_score(covers, unc) < delta


# ===============================================================================
# Open-tour TSP
# ===============================================================================
def tour_cost(dist, tour, start=0):
    cost = 0.0
    prev = start
    for node in tour:
        cost += dist[prev, node]
        prev = node
    return float(cost)


def nearest_neighbor_tour(dist, nodes, start=0):
    """Greedy construction; ties go to the lower index."""
    left = sorted(nodes)
    tour = []
    cur = start
    while left:
        nxt = min(left, key=lambda n: (dist[cur, n], n))
        tour.append(nxt)
        left.remove(nxt)
        cur = nxt
    return tour


def find_two_opt_move(dist, tour, start=0, eps=1e-9):
    """Return the first improving segment reversal (i, j), or None.

    Reversing ``tour[i:j + 1]`` replaces edges (prev, tour[i]) and
    (tour[j], next) by (prev, tour[j]) and (tour[i], next); the open end has
    no next edge.
    """
    path = [start] + list(tour)
    n = len(path)
    for i in range(1, n - 1):
        a, b = path[i - 1], path[i]
        for j in range(i + 1, n):
            c = path[j]
            delta = dist[a, c] - dist[a, b]
            if j + 1 < n:
                e = path[j + 1]
                delta += dist[b, e] - dist[c, e]
            if delta < -eps:
                return i - 1, j - 1
    return None


def two_opt(dist, tour, start=0):
    tour = list(tour)
    while True:
        move = find_two_opt_move(dist, tour, start)
        if move is None:
            return tour
        i, j = move
        tour[i : j + 1] = reversed(tour[i : j + 1])


def _or_opt(dist, tour, start=0, eps=1e-9):
    """Apply the first improving relocation of a 1-3 node segment."""
    best = tour_cost(dist, tour, start)
    n = len(tour)
    for seg_len in (1, 2, 3):
        for i in range(0, n - seg_len + 1):
            seg = tour[i : i + seg_len]
            rest = tour[:i] + tour[i + seg_len :]
            for k in range(len(rest) + 1):
                if k == i:
                    continue
                for piece in (seg, seg[::-1]):
                    cand = rest[:k] + piece + rest[k:]
                    if tour_cost(dist, cand, start) < best - eps:
                        return cand
    return None


def improve_tour(dist, tour, start=0):
    """Alternate 2-opt and segment relocation until neither improves."""
    tour = two_opt(dist, tour, start)
    while True:
        moved = _or_opt(dist, tour, start)
        if moved is None:
            return tour
        tour = two_opt(dist, moved, start)


def solve_open_tour(dist, restarts=8, seed=0, start=0, nodes=None):
    """Best open tour from `start` over `nodes` across `restarts` restarts.

    Restart 0 starts from the nearest-neighbor tour, the others from random
    permutations drawn from independent seeded streams.

    Returns:
        (tour, cost)
    """
    if nodes is None:
        nodes = [i for i in range(dist.shape[0]) if i != start]
    nodes = list(nodes)
    if not nodes:
        return [], 0.0
    streams = np.random.SeedSequence(seed).spawn(restarts)
    best, best_cost = None, math.inf
    for k in range(restarts):
        if k == 0:
            init = nearest_neighbor_tour(dist, nodes, start)
        else:
            rng = np.random.default_rng(streams[k])
            init = [nodes[i] for i in rng.permutation(len(nodes))]
        tour = improve_tour(dist, init, start)
        cost = tour_cost(dist, tour, start)
        if cost < best_cost - 1e-9:
            best, best_cost = tour, cost
    return best, best_cost


def site_distances(passable, start, sites):
    """Pairwise path lengths (cells) over ``[start] + sites``."""
    nodes = [start] + list(sites)
    fields = grid_utils.distance_fields(passable, nodes)
    idx_y = np.array([c[1] for c in nodes])
    idx_x = np.array([c[0] for c in nodes])
    dist = fields[:, idx_y, idx_x]
    return np.minimum(dist, dist.T)


def plan_tour(sites, start, passable, restarts=8, seed=0):
    """Open TSP tour from `start` over `sites` with belief path costs.

    Sites that cannot be reached from `start` are dropped with a warning.

    Returns:
        (ordered sites, cost in cells)
    """
    sites = list(sites)
    if not sites:
        return [], 0.0
    dist = site_distances(passable, start, sites)
    keep = [i + 1 for i in range(len(sites)) if math.isfinite(dist[0, i + 1])]
    for i in range(len(sites)):
        if i + 1 not in keep:
            write(f"Dropping unreachable tour site {sites[i]}", warning=True)
    order, cost = solve_open_tour(dist, restarts, seed, 0, keep)
    return [sites[i - 1] for i in order], cost


# ===============================================================================
# Candidates
# ===============================================================================
def sample_candidates(region, trav, resolution, spacing, jitter, rng, *, horizon=None):
    """Lattice pose candidates inside `region`, snapped to traversable cells.

    Args:
        region (np.ndarray[bool]): room area
        trav (np.ndarray[bool]): traversable (and reachable) cells
        spacing (float): lattice spacing (meters)
        jitter (float): uniform jitter amplitude (cells)
        horizon (LocalHorizon): restrict to the window if given
    Returns:
        (H, H_trav) lists of cells
    """
    h, w = region.shape
    step = spacing / resolution
    ok = region & trav
    candidates = []
    allowed = []
    if not region.any():
        return candidates, allowed
    ys, xs = np.nonzero(region)
    gx = np.arange(math.floor(xs.min() / step), math.floor(xs.max() / step) + 1)
    gy = np.arange(math.floor(ys.min() / step), math.floor(ys.max() / step) + 1)
    has_ok = bool(ok.any())
    if has_ok:
        dmap, (iy, ix) = ndimage.distance_transform_edt(~ok, return_indices=True)
    seen = set()
    for j in gy:
        for i in gx:
            px = (i + 0.5) * step + rng.uniform(-jitter, jitter)
            py = (j + 0.5) * step + rng.uniform(-jitter, jitter)
            cx = min(max(int(math.floor(px)), 0), w - 1)
            cy = min(max(int(math.floor(py)), 0), h - 1)
            if horizon is not None and not horizon.contains((cx, cy), resolution):
                continue
            near = has_ok and dmap[cy, cx] <= step / 2
            if not (region[cy, cx] or near):
                continue
            candidates.append((cx, cy))
            if not near:
                continue
            # Snap to the nearest traversable room cell
            cell = (int(ix[cy, cx]), int(iy[cy, cx]))
            if cell not in seen:
                seen.add(cell)
                allowed.append(cell)
    return candidates, allowed


# ===============================================================================
# RoomExplorer
# ===============================================================================
class RoomExplorer:
    """Coverage exploration state of one room.

    State persists while the room is left Partial and re-entered later.

    Args:
        room_id (int):
        params (PlannerParams):
        resolution (float):
    """

    def __init__(self, room_id, params, resolution):
        self.room_id = room_id
        self.params = params
        self.resolution = resolution
        self.plan = ExplorationPlan()
        self.horizon = None
        #: Surface claimed by reached or abandoned sites
        self.claimed = None
        self.site_covers = {}
        self.cycles = 0
        self.covered = False
        self._planned_version = None

    def __repr__(self):
        return "RoomExplorer<room {}, {} local, {} global>".format(
            self.room_id, len(self.plan.local_tour), len(self.plan.global_sites)
        )

    @property
    def d_cover_cells(self):
        return self.params.d_cover / self.resolution

    def _streams(self):
        ss = np.random.SeedSequence([self.params.seed, self.room_id, self.cycles])
        return ss.spawn(self.params.restarts + 1)

    def next_site(self):
        if self.plan.local_tour:
            return self.plan.local_tour[0]
        if self.plan.global_tour:
            return self.plan.global_tour[0]
        return None

    def _claim(self, site):
        cover = self.site_covers.pop(site, None)
        if cover is not None and self.claimed is not None:
            self.claimed.ravel()[cover] = True
        for lst in (self.plan.local_tour, self.plan.global_tour, self.plan.global_sites):
            if site in lst:
                lst.remove(site)

    def site_reached(self, site):
        self._claim(site)

    def site_failed(self, site):
        """Give up on an unreachable site."""
        self._claim(site)

    def needs_roll(self, pose):
        if self.plan.center is None:
            return False
        moved = math.hypot(pose[0] - self.plan.center[0], pose[1] - self.plan.center[1])
        return moved >= self.params.window / 4.0

    def roll_window(self, pose):
        """Move unvisited local sites that left the new window to the global horizon.

        Returns:
            list of migrated sites
        """
        horizon = LocalHorizon((pose[0], pose[1]), self.params.window)
        migrated = [s for s in self.plan.local_tour if not horizon.contains(s, self.resolution)]
        for s in migrated:
            self.plan.local_tour.remove(s)
            self.plan.global_sites.append(s)
        self.plan.center = (pose[0], pose[1])
        return migrated

    def update(self, rep, pose, trav, reachable):
        """Advance the planner; replan when needed.

        Args:
            rep (SceneRep):
            pose (tuple): (x, y, ...) meters
            trav (np.ndarray[bool]): traversable grid
            reachable (np.ndarray[bool]): traversable cells connected to the robot
        Returns:
            next site cell, or None if the room is covered
        """
        room = rep.rooms.get(self.room_id)
        if room is None:
            self.covered = True
            return None
        if self.claimed is None or self.claimed.shape != rep.known.shape:
            self.claimed = np.zeros(rep.known.shape, dtype=bool)
        rolled = False
        if self.needs_roll(pose):
            self.roll_window(pose)
            rolled = True
        stale = not self.plan.local_tour and rep.version != self._planned_version
        if rolled or self.cycles == 0 or stale:
            self.replan(rep, pose, trav, reachable)
        site = self.next_site()
        self.covered = site is None
        return site

    def replan(self, rep, pose, trav, reachable):
        """One planning cycle: sample, select, tour and merge with the global horizon."""
        p = self.params
        room = rep.rooms[self.room_id]
        start = rep.cell_of(pose)
        surface = compute_surface(rep.known, room.territory, covered=rep.covered | self.claimed)
        unc = surface.uncovered.copy()
        pending = [s for s in self.plan.global_sites]
        for s in pending:
            cov = self.site_covers.get(s)
            if cov is not None:
                unc.ravel()[cov] = False
        streams = self._streams()
        lattice_rng = np.random.default_rng(streams[-1])
        self.plan.center = (pose[0], pose[1])
        self.horizon = LocalHorizon((pose[0], pose[1]), p.window)

        region = room.territory & reachable
        best = self._best_selection(rep, surface, unc, start, trav, region, streams, lattice_rng)
        if best is None and not pending:
            # Nothing left in the window: consider the whole room
            best = self._best_selection(
                rep, surface, unc, start, trav, region, streams, lattice_rng, windowed=False
            )

        self.cycles += 1
        self._planned_version = rep.version
        self.plan.local_tour = []
        if best is not None:
            tour, cost, covers, trace = best
            self.plan.local_tour = tour
            self.plan.cost = cost
            self.plan.uncovered_trace = trace
            self.site_covers.update(covers)
        self.plan.global_sites = [s for s in self.plan.global_sites if reachable[s[1], s[0]]]
        for s in pending:
            if s not in self.plan.global_sites:
                self._claim(s)
        self._plan_global(trav, start)
        self.plan.waypoints = [start] + self.plan.local_tour + self.plan.global_tour
        if "planner" in DEBUG_FLAGS:
            write(f"room {self.room_id} plan {self.cycles}: {self.plan.to_dict()}", debug=True)
        return self.plan

    def _best_selection(
        self, rep, surface, unc, start, trav, region, streams, lattice_rng, windowed=True
    ):
        p = self.params
        horizon = self.horizon if windowed else None
        cands, allowed = sample_candidates(
            region, trav, self.resolution, p.spacing, p.jitter, lattice_rng, horizon=horizon
        )
        if horizon is not None:
            horizon.candidates, horizon.traversable = cands, allowed
        if not allowed:
            return None
        covers = [
            np.flatnonzero(
                coverage_of(c, surface.cells, self.d_cover_cells, rep.known).ravel()
            )
            for c in allowed
        ]
        if max_score(covers, unc) < p.delta:
            return None
        dist = site_distances(trav, start, allowed)
        best = None
        for k in range(p.restarts):
            rng = np.random.default_rng(streams[k])
            selected, _rest, trace = select_candidates(covers, unc, p.delta, rng)
            if not selected:
                continue
            nodes = [i + 1 for i in selected]
            tour = improve_tour(dist, nearest_neighbor_tour(dist, nodes, 0), 0)
            cost = tour_cost(dist, tour, 0)
            if best is None or cost < best[1] - 1e-9:
                sites = [allowed[i - 1] for i in tour]
                covers_by_site = {allowed[i - 1]: covers[i - 1] for i in tour}
                best = (sites, cost, covers_by_site, trace)
        return best

    def _plan_global(self, trav, start):
        sites = self.plan.global_sites
        if not sites:
            self.plan.global_tour = []
            return
        origin = self.plan.local_tour[-1] if self.plan.local_tour else start
        tour, _cost = plan_tour(sites, origin, trav, self.params.restarts, self.params.seed)
        self.plan.global_tour = tour
        self.plan.global_sites = list(tour)
