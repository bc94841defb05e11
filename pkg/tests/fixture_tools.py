# -*- coding: utf-8 -*-
"""
Tests for pyroomnav
"""
# Allow long lines for readabilty
# flake8: noqa: E501
import io
import os
import shutil
import sys
import tempfile
import unittest

from roomnav import pyroomnav
from roomnav.config import DEFAULT_CONFIG, merge_config
from roomnav.map_io import FORMAT_VERSION, map_from_dict
from roomnav.util import get_option

PYROOMNAV_TEST_FOLDER = (
    get_option("PYROOMNAV_TEST_FOLDER", "test", "folder") or tempfile.mkdtemp()
)

#: Map files checked into the repository
FIXTURE_FOLDER = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name):
    return os.path.join(FIXTURE_FOLDER, name)


class CaptureStdout(list):
    """Context manager that redirects sys.stdout into a buffer.

    Usage:
        with CaptureStdout() as out:
            do_semthing()
        print(out)

    Taken from here https://stackoverflow.com/a/16571630/19166
    and expanded to capture stderr as well.
    """

    def __init__(self, stdout=True, stderr=True):
        self._do_stdout = stdout
        self._do_stderr = stderr

    def __enter__(self):
        self._stdout = sys.stdout
        self._stderr = sys.stderr
        self._stringio = io.StringIO()
        if self._do_stdout:
            sys.stdout = self._stringio
        if self._do_stderr:
            sys.stderr = self._stringio
        return self

    def __exit__(self, *args):
        self.extend(self._stringio.getvalue().splitlines())
        del self._stringio  # Free up some memory
        sys.stdout = self._stdout
        sys.stderr = self._stderr


def run_script(*args, **kw):
    """Run `pyroomnav <args>`, check exit code, and return output.

    Example:
        out = run_script("-h")
        assert "pyroomnav" in out

        out = run_script("foobar", expect_code=2)
    """
    expect_code = kw.get("expect_code", 0)
    sys.argv = ["pyroomnav_dummy"] + list(args)
    errcode = 0
    out = []
    try:
        with CaptureStdout() as out:
            pyroomnav.run()
    except SystemExit as e:
        errcode = e.code

    if expect_code is not None:
        assert errcode == expect_code, f"exit code {errcode}: {out}"

    return "\n".join(out).strip()


def test_config(**sections):
    """Return the default configuration with some sections patched.

    Example:
        cfg = test_config(world={"sense_period": 1.0})
    """
    return merge_config(DEFAULT_CONFIG, sections)


# Not a test
test_config.__test__ = False


# ===============================================================================
# Map builders
# ===============================================================================
def blank_rows(width, height):
    """Rows of a Free area surrounded by a one cell wall."""
    rows = []
    for y in range(height):
        if y in (0, height - 1):
            rows.append(["#"] * width)
        else:
            rows.append(["#"] + ["."] * (width - 2) + ["#"])
    return rows


def room_map_dict(width=40, height=30, *, label="bedroom", objects=(), resolution=0.1):
    """Single walled room.

    `objects` is a sequence of dicts with `id`, `category`, `cells` and
    optional `attributes`; their cells are marked Occupied.
    """
    rows = blank_rows(width, height)
    res = {
        "format": FORMAT_VERSION,
        "name": "room",
        "resolution": resolution,
        "rooms": [{"id": 0, "label": label, "rects": [[0, 0, width - 1, height - 1]]}],
        "doors": [],
        "objects": [],
    }
    _add_objects(res, rows, objects)
    res["grid"] = ["".join(r) for r in rows]
    return res


def row_of_rooms_dict(
    labels, *, room_w=40, room_h=30, door_y=10, door_w=10, objects=(), resolution=0.1
):
    """Rooms side by side along x, each joined to the next by a door.

    Room `i` owns the interior columns ``1 + i * (room_w + 1)`` ..
    ``(i + 1) * (room_w + 1) - 1`` and its right wall column.
    """
    n = len(labels)
    width = n * (room_w + 1) + 1
    height = room_h + 2
    rows = blank_rows(width, height)
    rooms = []
    doors = []
    for i, label in enumerate(labels):
        x0 = i * (room_w + 1)
        x1 = x0 + room_w + 1
        if i < n - 1:
            for y in range(1, height - 1):
                rows[y][x1] = "#"
            cells = []
            for y in range(door_y, door_y + door_w):
                rows[y][x1] = "."
                cells.append([x1, y])
            doors.append({"cells": cells})
        else:
            x1 = width - 1
        # The shared wall column belongs to the left room
        left = x0 if i == 0 else x0 + 1
        rooms.append({"id": i, "label": label, "rects": [[left, 0, x1, height - 1]]})
    res = {
        "format": FORMAT_VERSION,
        "name": "row_of_rooms",
        "resolution": resolution,
        "rooms": rooms,
        "doors": doors,
        "objects": [],
    }
    _add_objects(res, rows, objects)
    res["grid"] = ["".join(r) for r in rows]
    return res


def room_x0(i, room_w=40):
    """First interior column of room `i` in a `row_of_rooms_dict` map."""
    return 1 + i * (room_w + 1)


def block_cells(x0, y0, w, h):
    return [[x, y] for y in range(y0, y0 + h) for x in range(x0, x0 + w)]


def _add_objects(res, rows, objects):
    for od in objects:
        d = {
            "id": od["id"],
            "category": od["category"],
            "attributes": od.get("attributes", {}),
            "cells": [list(c) for c in od["cells"]],
        }
        for x, y in d["cells"]:
            rows[y][x] = "#"
        res["objects"].append(d)


def room_map(*args, **kw):
    return map_from_dict(room_map_dict(*args, **kw))


def row_of_rooms(*args, **kw):
    return map_from_dict(row_of_rooms_dict(*args, **kw))


# ===============================================================================
# _TempFolderTestBase
# ===============================================================================
class _TempFolderTestBase(unittest.TestCase):
    """Test case with a fresh temp folder below PYROOMNAV_TEST_FOLDER."""

    def setUp(self):
        self.folder = tempfile.mkdtemp(dir=PYROOMNAV_TEST_FOLDER)

    def tearDown(self):
        shutil.rmtree(self.folder, ignore_errors=True)

    def path(self, *parts):
        return os.path.join(self.folder, *parts)
