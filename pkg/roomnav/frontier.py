"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

Nearest-frontier exploration, used by the flat baseline and as the sweep
fallback of the hierarchical navigator.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from roomnav import grid_utils
from roomnav.grid_utils import FREE, UNKNOWN

_CROSS = ndimage.generate_binary_structure(2, 1)
_SQUARE = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Frontier:
    id: int
    size: int
    #: (x, y) mean of the frontier cells
    centroid: tuple
    #: Reachable cell to drive to
    target: tuple
    #: Path distance to `target` (cells)
    distance: float


def frontier_mask(belief):
    """Known-Free cells 4-adjacent to Unknown space."""
    unknown = belief == UNKNOWN
    return (belief == FREE) & ndimage.binary_dilation(unknown, structure=_CROSS)


def detect_frontiers(belief, reachable, field, reach_cells, *, min_size=3, banned=None):
    """Frontier clusters, each with the nearest reachable cell within `reach_cells`.

    Args:
        belief (np.ndarray[int8]):
        reachable (np.ndarray[bool]): cells the robot can drive to
        field (np.ndarray[float]): path distance from the robot (cells)
        reach_cells (float): max distance target -> nearest frontier cell
        banned (np.ndarray[bool]): cells that may not be used as target
    Returns:
        list[Frontier] sorted by distance, then id
    """
    mask = frontier_mask(belief)
    labels, n = ndimage.label(mask, structure=_SQUARE)
    if n == 0:
        return []
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    dist, (iy, ix) = ndimage.distance_transform_edt(~mask, return_indices=True)
    cand = reachable & (dist <= reach_cells) & np.isfinite(field)
    if banned is not None:
        cand &= ~banned
    ys, xs = np.nonzero(cand)
    if not len(ys):
        return []
    owner = labels[iy[ys, xs], ix[ys, xs]]
    cost = field[ys, xs]
    # Cheapest cell per cluster: sort by (owner, cost, flat index)
    order = np.lexsort((ys * mask.shape[1] + xs, cost, owner))
    res = []
    last = None
    for k in order.tolist():
        lab = int(owner[k])
        if lab == last:
            continue
        last = lab
        if sizes[lab] < min_size:
            continue
        cy, cx = np.nonzero(labels == lab)
        res.append(
            Frontier(
                lab,
                int(sizes[lab]),
                (float(cx.mean()), float(cy.mean())),
                (int(xs[k]), int(ys[k])),
                float(cost[k]),
            )
        )
    res.sort(key=lambda f: (f.distance, f.id))
    return res


class FrontierExplorer:
    """Drive to the nearest frontier; ban the surroundings of visited targets.

    Args:
        resolution (float):
        reach (float): meters between target and frontier
        min_size (int): smallest frontier cluster (cells)
    """

    def __init__(self, resolution, *, reach=1.0, min_size=3):
        self.resolution = resolution
        self.reach_cells = reach / resolution
        self.min_size = min_size
        self.banned = None
        self.target = None

    def __repr__(self):
        return f"FrontierExplorer<target {self.target}>"

    def next_target(self, belief, reachable, field):
        """Return the next target cell, or None if no frontier is left."""
        if self.banned is None or self.banned.shape != belief.shape:
            self.banned = np.zeros(belief.shape, dtype=bool)
        frontiers = detect_frontiers(
            belief,
            reachable,
            field,
            self.reach_cells,
            min_size=self.min_size,
            banned=self.banned,
        )
        self.target = frontiers[0].target if frontiers else None
        return self.target

    def _ban(self, cell):
        r = max(1.0, 0.5 / self.resolution)
        st = grid_utils.disk_structure(r)
        h, w = self.banned.shape
        k = st.shape[0] // 2
        x, y = cell
        y0, y1 = max(0, y - k), min(h, y + k + 1)
        x0, x1 = max(0, x - k), min(w, x + k + 1)
        self.banned[y0:y1, x0:x1] |= st[y0 - y + k : y1 - y + k, x0 - x + k : x1 - x + k]

    def mark_reached(self, cell):
        if self.banned is not None:
            self._ban(cell)
        if cell == self.target:
            self.target = None

    mark_failed = mark_reached


def nearest_reachable(mask, field):
    """Return the cell of `mask` with the smallest finite `field`, or None."""
    d = np.where(mask, field, math.inf)
    idx = int(np.argmin(d))
    if not math.isfinite(d.ravel()[idx]):
        return None
    y, x = divmod(idx, mask.shape[1])
    return (x, y)
