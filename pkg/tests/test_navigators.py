# -*- coding: utf-8 -*-
"""
Tests for pyroomnav
"""
# flake8: noqa: E501
import math
import unittest

from roomnav.base_autonomy import PRESETS
from roomnav.gridworld import AgentState, AttrEq, Goal, sense
from roomnav.navigators import (
    NEW_ROOM_LABEL_WAIT,
    PARTIAL,
    UNVISITED,
    Approaching,
    Done,
    Exhausted,
    ExploringRoom,
    FlatNavigator,
    HierarchicalNavigator,
    QueryCounter,
    Transit,
    make_navigator,
    phase_to_dict,
)
from roomnav.reasoners import (
    EXHAUSTED,
    EarlyStopContext,
    OracleReasoner,
    PriorsTable,
    RoomQueryContext,
)
from roomnav.scene_rep import SceneRep
from tests.fixture_tools import (
    CaptureStdout,
    block_cells,
    room_map,
    room_x0,
    row_of_rooms,
    test_config,
)

WHEELED = PRESETS["wheeled"]


def _observe(grid_map, config, pose):
    rep = SceneRep.from_config(grid_map.cells.shape, config)
    obs = sense(grid_map, pose, WHEELED)
    rep.integrate_observation(obs)
    rep.maybe_add_viewpoint(pose, obs)
    rep.segment_rooms()
    return rep, obs


class _FailingReasoner(OracleReasoner):
    def decide(self, ctx):
        raise RuntimeError("offline")


# ===============================================================================
# PhaseTest
# ===============================================================================
class PhaseTest(unittest.TestCase):
    def test_phase_to_dict(self):
        assert phase_to_dict(None) == {"phase": None}
        expected = {"phase": "transit", "room": 1, "target": [2, 3]}
        assert phase_to_dict(Transit(1, (2, 3))) == expected
        assert phase_to_dict(Done(True)) == {"phase": "done", "success": True}
        assert phase_to_dict(Exhausted()) == {"phase": "exhausted"}

    def test_make_navigator(self):
        config = test_config()
        gm = room_map()
        oracle = OracleReasoner(gm, PriorsTable.load_default())
        nav = make_navigator("flat", config, WHEELED, 0.1, Goal("chair"), reasoner=oracle)
        assert isinstance(nav, FlatNavigator)
        assert nav.reasoner is None
        nav = make_navigator("hierarchical", config, WHEELED, 0.1, Goal("chair"), reasoner=oracle)
        assert isinstance(nav, HierarchicalNavigator)
        with self.assertRaisesRegex(ValueError, "Unknown navigator"):
            make_navigator("greedy", config, WHEELED, 0.1, Goal("chair"))
        with self.assertRaisesRegex(ValueError, "needs a reasoner"):
            make_navigator("hierarchical", config, WHEELED, 0.1, Goal("chair"))

    def test_query_counter(self):
        gm = room_map()
        stats = {"reasoner_queries": 0, "early_stop_queries": 0, "room_queries": 0}
        qc = QueryCounter(_FailingReasoner(gm, PriorsTable.load_default()), stats)
        goal = Goal("bed")
        with CaptureStdout() as out:
            assert qc.decide(EarlyStopContext({}, {}, goal)) is False
            assert qc.decide(RoomQueryContext([], [], goal)) == EXHAUSTED
        assert stats == {"reasoner_queries": 2, "early_stop_queries": 1, "room_queries": 1}
        assert "offline" in "\n".join(out)


# ===============================================================================
# NavigatorTest
# ===============================================================================
class NavigatorTest(unittest.TestCase):
    def setUp(self):
        self.config = test_config()
        chair = {"id": 1, "category": "chair", "cells": block_cells(32, 22, 2, 2)}
        self.chair_map = room_map(objects=[chair])
        self.pose = (2.05, 1.55, 0.0)

    def _reach(self, grid_map, cell, oid=1):
        """Distance (meters) from a cell center to the nearest object cell center."""
        res = grid_map.resolution
        return min(
            math.hypot(cell[0] - x, cell[1] - y) * res for x, y in grid_map.get_object(oid).cells
        )

    def test_flat_exhausted(self):
        gm = room_map()
        rep, obs = _observe(gm, self.config, self.pose)
        nav = FlatNavigator(self.config, WHEELED, 0.1, Goal("chair"))
        assert nav.tick(rep, obs, AgentState(*self.pose)) == []
        assert isinstance(nav.nav.phase, Exhausted)
        assert nav.finished and not nav.declared_success

    def test_flat_approach(self):
        gm = self.chair_map
        rep, obs = _observe(gm, self.config, self.pose)
        nav = FlatNavigator(self.config, WHEELED, 0.1, Goal("chair"))
        (target,) = nav.tick(rep, obs, AgentState(*self.pose))
        phase = nav.nav.phase
        assert isinstance(phase, Approaching)
        assert phase.target == target
        assert self._reach(gm, target) <= 0.5 + 1e-9
        assert nav.reachable[target[1], target[0]]

        # Standing on the approach cell: success is declared
        x, y = gm.center_of(target)
        assert nav.tick(rep, obs, AgentState(x, y, 0.0)) == []
        assert nav.nav.phase == Done(True)
        assert nav.declared_success

    def test_flat_checks_constraints(self):
        blue = {"id": 1, "category": "chair", "attributes": {"color": "blue"}, "cells": block_cells(24, 15, 2, 2)}
        red = {"id": 2, "category": "chair", "attributes": {"color": "red"}, "cells": block_cells(32, 25, 2, 2)}
        gm = room_map(objects=[blue, red])
        rep, obs = _observe(gm, self.config, self.pose)
        oracle = OracleReasoner(gm, PriorsTable.load_default())
        goal = Goal("chair", (AttrEq("color", "red"),))
        with self.assertRaisesRegex(ValueError, "needs a reasoner"):
            FlatNavigator(self.config, WHEELED, 0.1, goal)

        nav = make_navigator("flat", self.config, WHEELED, 0.1, goal, reasoner=oracle)
        assert nav.reasoner is not None
        with CaptureStdout():
            (target,) = nav.tick(rep, obs, AgentState(*self.pose))
        phase = nav.nav.phase
        assert isinstance(phase, Approaching)
        # The nearer blue chair is passed over
        assert rep.objects[phase.obj].attributes["color"] == "red"
        assert len(nav.nav.rejected) == 1
        assert self._reach(gm, target, oid=2) <= 0.5 + 1e-9
        assert nav.get_stats()["attribute_queries"] >= 1

    def test_hierarchical_verifies_and_approaches(self):
        gm = self.chair_map
        rep, obs = _observe(gm, self.config, self.pose)
        oracle = OracleReasoner(gm, PriorsTable.load_default())
        nav = HierarchicalNavigator(self.config, WHEELED, 0.1, Goal("chair"), reasoner=oracle)
        (target,) = nav.tick(rep, obs, AgentState(*self.pose))
        assert isinstance(nav.nav.phase, Approaching)
        assert nav.nav.resume == ExploringRoom(0)
        assert self._reach(gm, target) <= 0.5 + 1e-9
        stats = nav.get_stats()
        assert stats["phase_changes"] == 4
        assert stats["room_label_queries"] == 1

    def test_hierarchical_rejects_constraint(self):
        gm = self.chair_map
        rep, obs = _observe(gm, self.config, self.pose)
        oracle = OracleReasoner(gm, PriorsTable.load_default())
        goal = Goal.from_dict(
            {"category": "chair", "constraints": [{"type": "in_room", "room": "kitchen"}]}
        )
        nav = HierarchicalNavigator(self.config, WHEELED, 0.1, goal, reasoner=oracle)
        with CaptureStdout():
            nav.tick(rep, obs, AgentState(*self.pose))
        assert len(nav.nav.rejected) == 1
        assert not isinstance(nav.nav.phase, Approaching)

    def test_hierarchical_leaves_for_the_kitchen(self):
        oven = {"id": 1, "category": "oven", "cells": block_cells(room_x0(1) + 18, 27, 4, 2)}
        gm = row_of_rooms(["bedroom", "kitchen"], objects=[oven])
        pose = gm.center_of((20, 15)) + (0.0,)
        rep, obs = _observe(gm, self.config, pose)
        oracle = OracleReasoner(gm, PriorsTable.load_default())
        nav = HierarchicalNavigator(self.config, WHEELED, 0.1, Goal("oven"), reasoner=oracle)
        state = AgentState(*pose)

        wps = nav.tick(rep, obs, state)
        assert nav.nav.room_status[0] != UNVISITED
        for _ in range(NEW_ROOM_LABEL_WAIT + 1):
            if isinstance(nav.nav.phase, Transit):
                break
            wps = nav.tick(rep, obs, state)
        phase = nav.nav.phase
        assert phase.room == 1
        assert isinstance(phase, Transit)
        assert wps == [phase.target]
        assert rep.room_at(phase.target) == 1
        assert nav.nav.room_status[1] == UNVISITED
        assert nav.get_stats()["reasoner_queries"] >= 1

    def test_transit_enters_room(self):
        gm = row_of_rooms(["bedroom", "kitchen"])
        pose = gm.center_of((20, 15)) + (0.0,)
        rep, _obs = _observe(gm, self.config, pose)
        oracle = OracleReasoner(gm, PriorsTable.load_default())
        nav = HierarchicalNavigator(self.config, WHEELED, 0.1, Goal("bed"), reasoner=oracle)
        nav.refresh(rep, pose)
        nav.nav.room_status = {0: PARTIAL, 1: UNVISITED}
        nav.set_phase(Transit(1), "test")

        inside = gm.center_of((61, 15)) + (0.0,)
        obs1 = sense(gm, inside, WHEELED)
        rep.integrate_observation(obs1)
        rep.maybe_add_viewpoint(inside, obs1)
        rep.segment_rooms()
        nav.tick(rep, obs1, AgentState(*inside))
        # Entered and explored from inside
        assert nav.nav.room_status[1] != UNVISITED
        assert 1 in nav.explorers
        assert nav.nav.phase != Transit(1)
