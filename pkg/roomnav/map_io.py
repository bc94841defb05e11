"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

Versioned JSON files for maps and episode suites.
"""

import json
import os
from dataclasses import replace

import numpy as np
from scipy import ndimage

from roomnav.grid_utils import FREE, OCCUPIED
from roomnav.gridworld import EpisodeSpec, GridMap, ObjectInstance
from roomnav.util import write

# Increment if the file layout changes. Older files are rejected.
# v1: Initial version
FORMAT_VERSION = 1

GRID_CHARS = {".": FREE, "#": OCCUPIED}


class MapFormatError(ValueError):
    """Raised when a map or episode file cannot be parsed or violates invariants."""


class IncompatibleFormatVersionError(RuntimeError):
    """Raised when a file has a missing or unsupported `format` number."""


def read_json(path):
    """Load a JSON file and check its `format` field.

    Raises:
        MapFormatError: with line and column for syntax errors
        IncompatibleFormatVersionError:
    """
    try:
        with open(path, encoding="utf-8-sig") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise MapFormatError(
            f"{path}: line {e.lineno}, column {e.colno}: {e.msg}"
        ) from e
    check_format(data, path)
    return data


def check_format(data, source):
    if not isinstance(data, dict):
        raise MapFormatError(f"{source}: expected a JSON object at top level")
    version = data.get("format")
    if version != FORMAT_VERSION:
        raise IncompatibleFormatVersionError(
            f"{source}: unsupported format {version!r} (expected {FORMAT_VERSION})"
        )


# ===============================================================================
# Maps
# ===============================================================================
def map_from_dict(data, source="<map>"):
    """Build and validate a GridMap from its JSON representation."""
    check_format(data, source)
    try:
        resolution = float(data["resolution"])
        rows = data["grid"]
    except (KeyError, TypeError, ValueError) as e:
        raise MapFormatError(f"{source}: missing or invalid entry {e}") from e
    if resolution <= 0:
        raise MapFormatError(f"{source}: resolution must be positive")
    if not rows:
        raise MapFormatError(f"{source}: empty grid")

    width = len(rows[0])
    cells = np.zeros((len(rows), width), dtype=np.int8)
    for y, row in enumerate(rows):
        if len(row) != width:
            raise MapFormatError(
                f"{source}: grid row {y} has {len(row)} cells, expected {width}"
            )
        for x, ch in enumerate(row):
            if ch not in GRID_CHARS:
                raise MapFormatError(f"{source}: invalid cell {ch!r} at ({x}, {y})")
            cells[y, x] = GRID_CHARS[ch]

    height = len(rows)

    def _check_cell(c, what):
        x, y = int(c[0]), int(c[1])
        if not (0 <= x < width and 0 <= y < height):
            raise MapFormatError(f"{source}: {what} cell ({x}, {y}) is out of bounds")
        return x, y

    rooms_gt = np.full(cells.shape, -1, dtype=np.int32)
    room_labels = {}
    room_rects = {}
    for room in data.get("rooms", []):
        rid = int(room["id"])
        if rid in room_labels:
            raise MapFormatError(f"{source}: duplicate room id {rid}")
        room_labels[rid] = room.get("label")
        room_rects[rid] = [list(map(int, r)) for r in room.get("rects", [])]
        for x0, y0, x1, y1 in room_rects[rid]:
            _check_cell((x0, y0), f"room {rid}")
            _check_cell((x1, y1), f"room {rid}")
            for y in range(min(y0, y1), max(y0, y1) + 1):
                for x in range(min(x0, x1), max(x0, x1) + 1):
                    prev = rooms_gt[y, x]
                    if prev >= 0 and prev != rid:
                        if cells[y, x] == FREE:
                            raise MapFormatError(
                                f"{source}: Free cell ({x}, {y}) belongs to "
                                f"rooms {prev} and {rid}"
                            )
                        continue
                    rooms_gt[y, x] = rid

    doors = []
    door_cells = set()
    for door in data.get("doors", []):
        dc = [_check_cell(c, "door") for c in door["cells"]]
        doors.append(dc)
        door_cells.update(dc)

    objects = []
    seen_ids = set()
    for od in data.get("objects", []):
        oid = int(od["id"])
        if oid in seen_ids:
            raise MapFormatError(f"{source}: duplicate object id {oid}")
        seen_ids.add(oid)
        oc = frozenset(_check_cell(c, f"object {oid}") for c in od.get("cells", []))
        if not oc:
            raise MapFormatError(f"{source}: object {oid} has an empty footprint")
        objects.append(
            ObjectInstance(
                id=oid,
                category=str(od["category"]),
                attributes=dict(od.get("attributes", {})),
                cells=oc,
            )
        )
    objects.sort(key=lambda o: o.id)

    grid_map = GridMap(
        cells,
        resolution,
        rooms_gt=rooms_gt,
        room_labels=room_labels,
        room_rects=room_rects,
        doors=doors,
        objects=objects,
        name=data.get("name"),
    )
    validate_map(grid_map, door_cells, source)
    for obj in grid_map.objects:
        obj.room_id = grid_map.object_room(obj.cells)
    return grid_map


def validate_map(grid_map, door_cells, source="<map>"):
    """Check the room invariants of a ground-truth map.

    Raises:
        MapFormatError: naming the first offending cell
    """
    free = grid_map.free
    rooms_gt = grid_map.rooms_gt

    ys, xs = np.nonzero(free & (rooms_gt < 0))
    if len(xs):
        raise MapFormatError(
            f"{source}: Free cell ({xs[0]}, {ys[0]}) belongs to no room"
        )

    # Free passages between rooms must be doors
    for dx, dy in ((1, 0), (0, 1)):
        a = rooms_gt[: grid_map.height - dy, : grid_map.width - dx]
        b = rooms_gt[dy:, dx:]
        fa = free[: grid_map.height - dy, : grid_map.width - dx]
        fb = free[dy:, dx:]
        ys, xs = np.nonzero(fa & fb & (a != b))
        for x, y in zip(xs.tolist(), ys.tolist()):
            if (x, y) in door_cells or (x + dx, y + dy) in door_cells:
                continue
            raise MapFormatError(
                f"{source}: Free cell ({x}, {y}) connects rooms {a[y, x]} and "
                f"{b[y, x]} without a door"
            )

    for rid in sorted(grid_map.room_labels):
        room_free = free & (rooms_gt == rid)
        labels, n = ndimage.label(room_free)
        if n > 1:
            ys, xs = np.nonzero(labels == 2)
            raise MapFormatError(
                f"{source}: room {rid} is not connected at cell ({xs[0]}, {ys[0]})"
            )


def map_to_dict(grid_map):
    inv = {v: k for k, v in GRID_CHARS.items()}
    rows = ["".join(inv[int(v)] for v in row) for row in grid_map.cells]
    return {
        "format": FORMAT_VERSION,
        "name": grid_map.name,
        "resolution": grid_map.resolution,
        "grid": rows,
        "rooms": [
            {
                "id": rid,
                "label": grid_map.room_labels[rid],
                "rects": grid_map.room_rects.get(rid, []),
            }
            for rid in sorted(grid_map.room_labels)
        ],
        "doors": [{"cells": [list(c) for c in d]} for d in grid_map.doors],
        "objects": [
            {
                "id": o.id,
                "category": o.category,
                "attributes": dict(sorted(o.attributes.items())),
                "cells": [list(c) for c in sorted(o.cells)],
            }
            for o in grid_map.objects
        ],
    }


def load_map(path):
    """Load and validate a map file.

    Returns:
        GridMap (with `objects`)
    """
    data = read_json(path)
    grid_map = map_from_dict(data, source=path)
    if grid_map.name is None:
        grid_map.name = os.path.splitext(os.path.basename(path))[0]
    return grid_map


def save_map(grid_map, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(map_to_dict(grid_map), f, indent=1, ensure_ascii=False)
        f.write("\n")
    write(f"Wrote {path}", debug=True)


# ===============================================================================
# Episodes
# ===============================================================================
def load_episodes(path):
    """Return a list of EpisodeSpec. Map references are made absolute."""
    data = read_json(path)
    folder = os.path.dirname(os.path.abspath(path))
    res = []
    for i, ed in enumerate(data.get("episodes", [])):
        try:
            spec = EpisodeSpec.from_dict(ed)
        except (KeyError, TypeError, ValueError) as e:
            raise MapFormatError(f"{path}: invalid episode #{i}: {e}") from e
        if not os.path.isabs(spec.map_ref):
            spec = replace(spec, map_ref=os.path.join(folder, spec.map_ref))
        res.append(spec)
    return res


def save_episodes(specs, path, *, relative_to=None):
    """Write an episode suite. Map paths are stored relative to `relative_to`."""
    base = relative_to or os.path.dirname(os.path.abspath(path))
    episodes = []
    for spec in specs:
        d = spec.to_dict()
        if os.path.isabs(d["map"]):
            d["map"] = os.path.relpath(d["map"], base)
        episodes.append(d)
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"format": FORMAT_VERSION, "episodes": episodes}, f, indent=1)
        f.write("\n")
