# -*- coding: utf-8 -*-
"""
Tests for pyroomnav
"""
import math
import unittest

import numpy as np

from roomnav import grid_utils
from roomnav.frontier import (
    Frontier,
    FrontierExplorer,
    detect_frontiers,
    frontier_mask,
    nearest_reachable,
)
from roomnav.grid_utils import FREE, UNKNOWN


def _strip_belief():
    """Free band x = 5..14 between two Unknown areas (10 rows)."""
    belief = np.full((10, 20), UNKNOWN, dtype=np.int8)
    belief[:, 5:15] = FREE
    return belief


def _field(belief, cell):
    return grid_utils.distance_field(belief == FREE, cell)


# ===============================================================================
# FrontierTest
# ===============================================================================
class FrontierTest(unittest.TestCase):
    def test_frontier_mask(self):
        belief = np.full((10, 10), UNKNOWN, dtype=np.int8)
        belief[2:6, 2:6] = FREE
        mask = frontier_mask(belief)
        assert int(mask.sum()) == 12
        assert mask[2, 2] and not mask[3, 3]
        # Grid edges are not frontiers
        belief[:] = FREE
        assert not frontier_mask(belief).any()

    def test_detect(self):
        belief = _strip_belief()
        field = _field(belief, (7, 5))
        reachable = np.isfinite(field)
        res = detect_frontiers(belief, reachable, field, 3.0)
        assert res == [
            Frontier(1, 10, (5.0, 4.5), (7, 5), 0.0),
            Frontier(2, 10, (14.0, 4.5), (11, 5), 4.0),
        ]
        assert detect_frontiers(belief, reachable, field, 3.0, min_size=11) == []

        banned = np.zeros(belief.shape, dtype=bool)
        banned[:, 5:9] = True
        res = detect_frontiers(belief, reachable, field, 3.0, banned=banned)
        assert [f.id for f in res] == [2]

    def test_unreachable(self):
        belief = _strip_belief()
        field = np.full(belief.shape, math.inf)
        reachable = np.zeros(belief.shape, dtype=bool)
        assert detect_frontiers(belief, reachable, field, 3.0) == []
        belief[:] = FREE
        assert detect_frontiers(belief, reachable, field, 3.0) == []

    def test_explorer(self):
        belief = _strip_belief()
        field = _field(belief, (7, 5))
        reachable = np.isfinite(field)
        explorer = FrontierExplorer(0.5, reach=1.5)
        assert explorer.next_target(belief, reachable, field) == (7, 5)
        explorer.mark_reached((7, 5))
        assert explorer.target is None
        assert explorer.banned[5, 6] and explorer.banned[4, 7]
        assert not explorer.banned[4, 6]
        # Next cheapest cell of the same frontier, lowest flat index on ties
        assert explorer.next_target(belief, reachable, field) == (6, 4)

    def test_nearest_reachable(self):
        field = np.array([[0.0, 1.0, 2.0], [1.0, math.inf, 3.0]])
        mask = np.array([[False, True, True], [True, True, False]])
        assert nearest_reachable(mask, field) == (1, 0)
        mask = np.array([[False, False, False], [False, True, False]])
        assert nearest_reachable(mask, field) is None
