# -*- coding: utf-8 -*-
"""
Tests for pyroomnav
"""

from roomnav.episode import EpisodeTrace, TraceFormatError, run_episode
from roomnav.gridworld import EpisodeSpec, Goal
from roomnav.render import check_room_references, decode_mask, render
from tests.fixture_tools import _TempFolderTestBase, block_cells, room_map, test_config


def _chair_trace():
    chair = {"id": 1, "category": "chair", "cells": block_cells(32, 22, 2, 2)}
    gm = room_map(objects=[chair])
    spec = EpisodeSpec("ep_0001", "room.json", (2.05, 1.55, 0.0), Goal("chair"), 60.0, seed=1)
    _result, trace = run_episode(gm, spec, test_config())
    return gm, trace


# ===============================================================================
# RenderTest
# ===============================================================================
class RenderTest(_TempFolderTestBase):
    def test_decode_mask(self):
        mask = decode_mask([[0, 2], [5, 1]], (2, 3))
        assert mask.tolist() == [[True, True, False], [False, False, True]]
        assert not decode_mask([], (2, 2)).any()

    def test_render_is_deterministic(self):
        gm, trace = _chair_trace()
        a, b = self.path("a.svg"), self.path("b.svg")
        render(trace, gm, a)
        render(trace, gm, b)
        with open(a, "rb") as f:
            data_a = f.read()
        with open(b, "rb") as f:
            data_b = f.read()
        assert data_a == data_b
        assert b"<svg" in data_a

    def test_render_written_trace(self):
        gm, trace = _chair_trace()
        path = self.path("trace.jsonl")
        trace.write(path)
        loaded = EpisodeTrace.read(path)
        check_room_references(loaded)
        out = self.path("trace.svg")
        render(loaded, gm, out, title="custom")
        with open(out, encoding="utf-8") as f:
            assert "custom" in f.read()

    def test_render_map_only(self):
        out = self.path("empty.svg")
        render(EpisodeTrace(), room_map(), out)
        with open(out, "rb") as f:
            assert b"<svg" in f.read()

    def test_unknown_room(self):
        trace = EpisodeTrace()
        trace.log("room_selected", room=5)
        with self.assertRaisesRegex(TraceFormatError, "references unknown room id 5"):
            check_room_references(trace)
        with self.assertRaisesRegex(TraceFormatError, "unknown room id 5"):
            render(trace, room_map(), self.path("bad.svg"))

        trace = EpisodeTrace()
        trace.log("rooms", added=[5])
        trace.log("room_selected", room=5)
        check_room_references(trace)

    def test_unknown_room_edge(self):
        trace = EpisodeTrace()
        trace.log("scene", rooms=[{"id": 0, "mask": []}], edges={"r_r": [[0, 3]]})
        with self.assertRaisesRegex(TraceFormatError, r"room edge \(0, 3\)"):
            check_room_references(trace)
