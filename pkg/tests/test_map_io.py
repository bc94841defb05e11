# -*- coding: utf-8 -*-
"""
Tests for pyroomnav
"""
# flake8: noqa: E501
import json

from roomnav.gridworld import EpisodeSpec, Goal
from roomnav.map_io import (
    IncompatibleFormatVersionError,
    MapFormatError,
    load_episodes,
    load_map,
    map_from_dict,
    map_to_dict,
    save_episodes,
    save_map,
)
from tests.fixture_tools import _TempFolderTestBase, block_cells, fixture_path, room_map_dict, row_of_rooms_dict


# ===============================================================================
# MapIoTest
# ===============================================================================
class MapIoTest(_TempFolderTestBase):
    def test_parse(self):
        data = row_of_rooms_dict(
            ["bedroom", "kitchen"],
            objects=[{"id": 7, "category": "sofa", "attributes": {"color": "red"}, "cells": block_cells(50, 3, 3, 2)}],
        )
        grid_map = map_from_dict(data)
        assert (grid_map.width, grid_map.height) == (83, 32)
        assert grid_map.room_labels == {0: "bedroom", 1: "kitchen"}
        assert len(grid_map.doors) == 1
        assert grid_map.rooms_gt[15, 41] == 0
        assert grid_map.rooms_gt[15, 42] == 1
        sofa = grid_map.get_object(7)
        assert sofa.room_id == 1
        assert sofa.attributes == {"color": "red"}
        assert sofa.bbox == (50, 3, 52, 4)
        assert grid_map.occupied[3, 50]

    def test_save_load(self):
        data = room_map_dict(objects=[{"id": 1, "category": "bed", "cells": block_cells(2, 2, 4, 6)}])
        grid_map = map_from_dict(data)
        path = self.path("room.json")
        save_map(grid_map, path)
        loaded = load_map(path)
        assert map_to_dict(loaded) == map_to_dict(grid_map)
        assert loaded.name == "room"

    def test_threeroom_fixture(self):
        path = fixture_path("threeroom.json")
        with open(path) as f:
            raw = json.load(f)
        grid_map = load_map(path)
        assert grid_map.name == "threeroom"
        assert len(grid_map.room_labels) == len(raw["rooms"]) == 3
        assert len(grid_map.doors) == len(raw["doors"]) == 2
        assert len(grid_map.objects) == len(raw["objects"]) == 7
        assert int(grid_map.occupied.sum()) == sum(row.count("#") for row in raw["grid"])
        rooms = {o.category: grid_map.room_labels[o.room_id] for o in grid_map.objects}
        assert rooms["bed"] == "bedroom"
        assert rooms["sofa"] == "living_room"
        assert rooms["refrigerator"] == rooms["microwave"] == "kitchen"

    def test_name_from_file(self):
        data = room_map_dict()
        del data["name"]
        path = self.path("lobby.json")
        with open(path, "w") as f:
            json.dump(data, f)
        assert load_map(path).name == "lobby"

    def test_format_version(self):
        data = room_map_dict()
        data["format"] = 99
        with self.assertRaises(IncompatibleFormatVersionError):
            map_from_dict(data)

    def test_bad_rows(self):
        data = room_map_dict()
        data["grid"][3] = data["grid"][3][:-1]
        with self.assertRaisesRegex(MapFormatError, "grid row 3 has 39 cells, expected 40"):
            map_from_dict(data)

        data = room_map_dict()
        data["grid"][3] = "x" + data["grid"][3][1:]
        with self.assertRaisesRegex(MapFormatError, r"invalid cell 'x' at \(0, 3\)"):
            map_from_dict(data)

    def test_free_cell_without_room(self):
        data = room_map_dict()
        data["rooms"][0]["rects"] = [[0, 0, 20, 29]]
        with self.assertRaisesRegex(MapFormatError, r"Free cell \(21, 1\) belongs to no room"):
            map_from_dict(data)

    def test_rooms_without_door(self):
        data = row_of_rooms_dict(["bedroom", "kitchen"])
        data["doors"] = []
        with self.assertRaisesRegex(
            MapFormatError, r"Free cell \(41, 10\) connects rooms 0 and 1 without a door"
        ):
            map_from_dict(data)

    def test_disconnected_room(self):
        data = room_map_dict()
        rows = [list(r) for r in data["grid"]]
        for y in range(len(rows)):
            rows[y][20] = "#"
        data["grid"] = ["".join(r) for r in rows]
        with self.assertRaisesRegex(MapFormatError, "room 0 is not connected"):
            map_from_dict(data)

    def test_object_errors(self):
        data = room_map_dict(objects=[{"id": 1, "category": "bed", "cells": [[2, 2]]}])
        data["objects"].append(dict(data["objects"][0]))
        with self.assertRaisesRegex(MapFormatError, "duplicate object id 1"):
            map_from_dict(data)

        data = room_map_dict(objects=[{"id": 1, "category": "bed", "cells": [[2, 2]]}])
        data["objects"][0]["cells"] = [[200, 2]]
        with self.assertRaisesRegex(MapFormatError, r"object 1 cell \(200, 2\) is out of bounds"):
            map_from_dict(data)


# ===============================================================================
# EpisodeFileTest
# ===============================================================================
class EpisodeFileTest(_TempFolderTestBase):
    def test_relative_map_refs(self):
        map_path = self.path("m1.json")
        specs = [
            EpisodeSpec("e1", map_path, (1.0, 2.0, 0.5), Goal("bed"), 180.0, seed=3, tier="easy"),
        ]
        suite_path = self.path("suite.json")
        save_episodes(specs, suite_path)
        with open(suite_path) as f:
            raw = json.load(f)
        assert raw["episodes"][0]["map"] == "m1.json"

        loaded = load_episodes(suite_path)
        assert loaded == specs

    def test_invalid_episode(self):
        suite_path = self.path("suite.json")
        with open(suite_path, "w") as f:
            json.dump({"format": 1, "episodes": [{"id": "e1", "map": "m.json"}]}, f)
        with self.assertRaisesRegex(MapFormatError, "invalid episode #0"):
            load_episodes(suite_path)
