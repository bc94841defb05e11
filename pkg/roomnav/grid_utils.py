"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

Grid primitives shared by the simulator, the scene representation and the
planners: supercover ray traversal, visibility, clearance inflation and
shortest paths.

Cells are addressed as ``(x, y)`` (column, row); arrays are indexed
``grid[y, x]``.
"""

import functools
import heapq
import math

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

UNKNOWN = -1
FREE = 0
OCCUPIED = 1

SQRT2 = math.sqrt(2.0)

#: 8-connected neighborhood as (dx, dy, cost)
NEIGHBORS_8 = (
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT2),
    (1, -1, SQRT2),
    (-1, 1, SQRT2),
    (-1, -1, SQRT2),
)


# ===============================================================================
# Ray traversal
# ===============================================================================
def supercover(x0, y0, x1, y1):
    """Return all cells touched by the segment between two cell centers.

    Cells whose square is only touched at a corner are included (both side
    cells when the segment passes exactly through a lattice corner).
    The result starts with ``(x0, y0)`` and ends with ``(x1, y1)``.
    """
    dx = x1 - x0
    dy = y1 - y0
    xstep = 1 if dx >= 0 else -1
    ystep = 1 if dy >= 0 else -1
    dx = abs(dx)
    dy = abs(dy)
    ddx = 2 * dx
    ddy = 2 * dy
    x, y = x0, y0
    res = [(x, y)]
    if ddx >= ddy:
        errorprev = error = dx
        for _ in range(dx):
            x += xstep
            error += ddy
            if error > ddx:
                y += ystep
                error -= ddx
                if error + errorprev < ddx:
                    res.append((x, y - ystep))
                elif error + errorprev > ddx:
                    res.append((x - xstep, y))
                else:
                    res.append((x, y - ystep))
                    res.append((x - xstep, y))
            res.append((x, y))
            errorprev = error
    else:
        errorprev = error = dy
        for _ in range(dy):
            y += ystep
            error += ddx
            if error > ddy:
                x += xstep
                error -= ddy
                if error + errorprev < ddy:
                    res.append((x - xstep, y))
                elif error + errorprev > ddy:
                    res.append((x, y - ystep))
                else:
                    res.append((x - xstep, y))
                    res.append((x, y - ystep))
            res.append((x, y))
            errorprev = error
    return res


class _RayTable:
    """Precomputed intermediate cells for every offset within a radius."""

    def __init__(self, max_radius):
        r = int(max_radius)
        offsets = []
        rays = []
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if dx * dx + dy * dy > r * r:
                    continue
                offsets.append((dx, dy))
                cells = supercover(0, 0, dx, dy)
                # Strip origin and target
                rays.append(cells[1:-1] if len(cells) > 1 else [])
        width = max(1, max(len(c) for c in rays))
        n = len(offsets)
        self.offsets = np.array(offsets, dtype=np.int32).reshape(n, 2)
        self.dist = np.hypot(self.offsets[:, 0], self.offsets[:, 1])
        self.ray_dx = np.zeros((n, width), dtype=np.int32)
        self.ray_dy = np.zeros((n, width), dtype=np.int32)
        self.ray_valid = np.zeros((n, width), dtype=bool)
        for i, cells in enumerate(rays):
            if cells:
                arr = np.array(cells, dtype=np.int32)
                self.ray_dx[i, : len(cells)] = arr[:, 0]
                self.ray_dy[i, : len(cells)] = arr[:, 1]
                self.ray_valid[i, : len(cells)] = True


@functools.lru_cache(maxsize=16)
def _ray_table(max_radius):
    return _RayTable(max_radius)


def visible_mask(blocked, origin, radius, *, strict=False):
    """Return a boolean grid of cells visible from `origin`.

    A cell is visible if its center lies within `radius` cells of the origin
    center (``< radius`` when `strict`) and no cell strictly between origin and
    target on the supercover is blocked. Blocked cells themselves can be
    visible (walls are seen, not seen through).

    Args:
        blocked (np.ndarray[bool]): cells that stop a ray
        origin (tuple): (x, y) cell
        radius (float): range in cells
    """
    h, w = blocked.shape
    res = np.zeros((h, w), dtype=bool)
    if radius <= 0:
        return res
    ox, oy = origin
    table = _ray_table(int(math.ceil(radius)))
    if strict:
        in_range = table.dist < radius
    else:
        in_range = table.dist <= radius
    tx = ox + table.offsets[:, 0]
    ty = oy + table.offsets[:, 1]
    sel = in_range & (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
    idx = np.nonzero(sel)[0]
    ix = np.clip(ox + table.ray_dx[idx], 0, w - 1)
    iy = np.clip(oy + table.ray_dy[idx], 0, h - 1)
    hit = blocked[iy, ix] & table.ray_valid[idx]
    ok = ~hit.any(axis=1)
    res[ty[idx[ok]], tx[idx[ok]]] = True
    return res


def line_of_sight(blocked, a, b):
    """Return True if no cell strictly between `a` and `b` is blocked."""
    for x, y in supercover(a[0], a[1], b[0], b[1])[1:-1]:
        if blocked[y, x]:
            return False
    return True


# ===============================================================================
# Clearance
# ===============================================================================
@functools.lru_cache(maxsize=32)
def clearance_structure(radius):
    """Structuring element of cells whose square is closer than `radius` cells.

    The distance is measured from the center cell's center to the nearest
    point of the other cell's square.
    """
    r = int(math.ceil(radius)) + 1
    ys, xs = np.mgrid[-r : r + 1, -r : r + 1]
    gx = np.maximum(np.abs(xs) - 0.5, 0.0)
    gy = np.maximum(np.abs(ys) - 0.5, 0.0)
    st = np.hypot(gx, gy) < radius
    st[r, r] = True
    return st


@functools.lru_cache(maxsize=32)
def disk_structure(radius):
    """Structuring element of cells with center distance <= `radius` cells."""
    r = int(math.floor(radius))
    ys, xs = np.mgrid[-r : r + 1, -r : r + 1]
    return xs * xs + ys * ys <= radius * radius


def inflate(blocked, radius):
    """Return the traversable grid for a disk robot of `radius` cells.

    Cells outside the grid count as blocked.
    """
    if radius <= 0:
        return ~blocked
    grown = ndimage.binary_dilation(
        blocked, structure=clearance_structure(radius), border_value=1
    )
    return ~grown


# ===============================================================================
# Shortest paths
# ===============================================================================
def grid_graph(passable):
    """Return a sparse 8-connected graph over `passable` cells.

    Diagonal moves require both orthogonal neighbors to be passable
    (no corner cutting). Node ids are flat indices ``y * width + x``.
    """
    h, w = passable.shape
    n = h * w
    rows = []
    cols = []
    vals = []
    flat = np.arange(n).reshape(h, w)
    for dx, dy, cost in NEIGHBORS_8:
        ys0, ys1 = max(0, -dy), h - max(0, dy)
        xs0, xs1 = max(0, -dx), w - max(0, dx)
        src = passable[ys0:ys1, xs0:xs1]
        dst = passable[ys0 + dy : ys1 + dy, xs0 + dx : xs1 + dx]
        ok = src & dst
        if dx and dy:
            ok = ok & passable[ys0:ys1, xs0 + dx : xs1 + dx]
            ok = ok & passable[ys0 + dy : ys1 + dy, xs0:xs1]
        a = flat[ys0:ys1, xs0:xs1][ok]
        b = flat[ys0 + dy : ys1 + dy, xs0 + dx : xs1 + dx][ok]
        rows.append(a)
        cols.append(b)
        vals.append(np.full(a.shape, cost))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def distance_fields(passable, sources, graph=None):
    """Return an array (len(sources), h, w) of path lengths in cells.

    Unreachable cells are ``inf``. Sources need not be passable themselves:
    a non-passable source is connected to its passable neighbors.
    """
    h, w = passable.shape
    if not sources:
        return np.zeros((0, h, w))
    pas = passable.copy()
    for x, y in sources:
        pas[y, x] = True
    if graph is None or not all(passable[y, x] for x, y in sources):
        graph = grid_graph(pas)
    idx = [y * w + x for x, y in sources]
    dist = dijkstra(graph, directed=True, indices=idx)
    return np.asarray(dist).reshape(len(sources), h, w)


def distance_field(passable, source):
    """Return an (h, w) array of path lengths in cells from one source."""
    return distance_fields(passable, [source])[0]


def multi_source_distance(passable, sources):
    """Return an (h, w) array of path lengths to the nearest of `sources`."""
    h, w = passable.shape
    if not sources:
        return np.full((h, w), np.inf)
    pas = passable.copy()
    for x, y in sources:
        pas[y, x] = True
    graph = grid_graph(pas)
    idx = [y * w + x for x, y in sources]
    dist = dijkstra(graph, directed=False, indices=idx, min_only=True)
    return np.asarray(dist).reshape(h, w)


def geodesic_partition(passable, seeds, *, limit=np.inf, fill=-1):
    """Give every passable cell the label of its nearest seed (8-connected path).

    Args:
        passable (np.ndarray[bool]):
        seeds (np.ndarray[int]): (h, w) label per seed cell, `fill` elsewhere
        limit (float): cells farther than this (in cells) keep `fill`
    """
    h, w = passable.shape
    flat = seeds.ravel()
    idx = np.flatnonzero(flat != fill)
    res = np.full(h * w, fill, dtype=seeds.dtype)
    if not len(idx):
        return res.reshape(h, w)
    pas = passable.copy()
    pas.ravel()[idx] = True
    _, _, src = dijkstra(
        grid_graph(pas),
        directed=False,
        indices=idx,
        min_only=True,
        return_predecessors=True,
        limit=limit,
    )
    ok = src >= 0
    res[ok] = flat[src[ok]]
    return res.reshape(h, w)


def astar(passable, start, goal):
    """Return the optimal 8-connected cell path from `start` to `goal`.

    The start cell is accepted even if not passable (the robot is already
    there). Returns a list of cells including both ends, ``[start]`` if
    start == goal, or None if the goal cannot be reached.
    """
    h, w = passable.shape
    sx, sy = start
    gx, gy = goal
    if (sx, sy) == (gx, gy):
        return [start]
    if not (0 <= gx < w and 0 <= gy < h) or not passable[gy, gx]:
        return None

    def _h(x, y):
        ddx = abs(x - gx)
        ddy = abs(y - gy)
        return (ddx + ddy) + (SQRT2 - 2.0) * min(ddx, ddy)

    def _ok(x, y):
        return 0 <= x < w and 0 <= y < h and (passable[y, x] or (x, y) == start)

    g_score = {start: 0.0}
    came_from = {}
    counter = 0
    open_heap = [(_h(sx, sy), 0.0, counter, start)]
    closed = set()
    while open_heap:
        _, g, _, cur = heapq.heappop(open_heap)
        if cur in closed:
            continue
        if cur == goal:
            path = [cur]
            while cur in came_from:
                cur = came_from[cur]
                path.append(cur)
            path.reverse()
            return path
        closed.add(cur)
        cx, cy = cur
        for dx, dy, cost in NEIGHBORS_8:
            nx, ny = cx + dx, cy + dy
            if not _ok(nx, ny) or (nx, ny) in closed:
                continue
            if dx and dy and not (_ok(cx + dx, cy) and _ok(cx, cy + dy)):
                continue
            ng = g + cost
            if ng < g_score.get((nx, ny), math.inf) - 1e-12:
                g_score[(nx, ny)] = ng
                came_from[(nx, ny)] = cur
                counter += 1
                heapq.heappush(open_heap, (ng + _h(nx, ny), ng, counter, (nx, ny)))
    return None


def path_length(path):
    """Length of a cell path in cells (1 per orthogonal, sqrt(2) per diagonal)."""
    total = 0.0
    for (x0, y0), (x1, y1) in zip(path, path[1:]):
        total += SQRT2 if (x0 != x1 and y0 != y1) else 1.0
    return total


def four_neighbors_mask(mask):
    """Return cells 4-adjacent to `mask` (excluding `mask` itself)."""
    grown = ndimage.binary_dilation(mask, structure=ndimage.generate_binary_structure(2, 1))
    return grown & ~mask


def cells_of(mask):
    """Return the set of (x, y) cells where `mask` is true."""
    ys, xs = np.nonzero(mask)
    return set(zip(xs.tolist(), ys.tolist()))


def mask_of(cells, shape):
    """Return a boolean grid of `shape` with `cells` set."""
    m = np.zeros(shape, dtype=bool)
    if cells:
        arr = np.array(list(cells), dtype=np.int64)
        m[arr[:, 1], arr[:, 0]] = True
    return m
