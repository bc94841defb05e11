"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

Deterministic SVG rendering of an episode trace over its map.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from roomnav.episode import TraceFormatError  # noqa: E402
from roomnav.gridworld import Goal, satisfying_instances  # noqa: E402
from roomnav.util import write  # noqa: E402

#: Event fields that reference room ids
ROOM_FIELDS = ("room", "current", "new")

RC_PARAMS = {
    "svg.hashsalt": "pyroomnav",
    "svg.fonttype": "none",
    "path.simplify": False,
}


def decode_mask(runs, shape):
    """Inverse of the run-length encoding used in scene snapshots."""
    flat = np.zeros(shape[0] * shape[1], dtype=bool)
    for start, length in runs:
        flat[start : start + length] = True
    return flat.reshape(shape)


def check_room_references(trace):
    """Raise TraceFormatError if an event names a room that was never announced.

    Rooms are announced by `rooms` events and by the final `scene` snapshot.
    """
    known = set()
    for e in trace.find("rooms"):
        known.update(e.get("added", ()))
    for e in trace.find("scene"):
        known.update(r["id"] for r in e.get("rooms", ()))
    for i, e in enumerate(trace.events):
        if e["event"] == "query":
            continue
        for key in ROOM_FIELDS:
            rid = e.get(key)
            if isinstance(rid, int) and not isinstance(rid, bool) and rid not in known:
                raise TraceFormatError(
                    "line {}: `{}` event references unknown room id {}".format(
                        trace.line_of(i), e["event"], rid
                    )
                )
    for i, e in enumerate(trace.events):
        if e["event"] != "scene":
            continue
        ids = {r["id"] for r in e.get("rooms", ())}
        for a, b in e.get("edges", {}).get("r_r", ()):
            if a not in ids or b not in ids:
                raise TraceFormatError(
                    f"line {trace.line_of(i)}: room edge ({a}, {b}) references unknown room id"
                )


def _room_colors(n):
    cmap = matplotlib.colormaps["tab20"]
    return [cmap(i % 20) for i in range(n)]


def render(trace, grid_map, out_path, *, title=None):
    """Write an SVG of `grid_map` with the rooms, graph and trajectory of `trace`.

    An empty trace renders the map only.
    """
    check_room_references(trace)
    res = grid_map.resolution
    h, w = grid_map.cells.shape
    extent = (0, w * res, 0, h * res)

    with matplotlib.rc_context(RC_PARAMS):
        fig, ax = plt.subplots(1, 1, figsize=(max(4.0, w * res / 2), max(4.0, h * res / 2)))
        base = np.where(grid_map.occupied, 0.15, 1.0)
        ax.imshow(
            base,
            cmap="gray",
            vmin=0,
            vmax=1,
            origin="lower",
            extent=extent,
            interpolation="nearest",
        )

        scenes = trace.find("scene")
        scene = scenes[-1] if scenes else None
        if scene is not None:
            _draw_scene(ax, scene, (h, w), res)

        traj = trace.trajectory()
        if traj:
            xs, ys = zip(*traj)
            ax.plot(xs, ys, color="tab:red", linewidth=1.2, label="trajectory")
            ax.plot(xs[0], ys[0], marker="o", color="tab:red", markersize=6)

        goal_d = trace.header.get("goal")
        if goal_d:
            goal = Goal.from_dict(goal_d)
            for obj in satisfying_instances(grid_map, goal):
                cx, cy = obj.centroid_cell
                ax.plot(
                    (cx + 0.5) * res,
                    (cy + 0.5) * res,
                    marker="*",
                    color="gold",
                    markeredgecolor="black",
                    markersize=14,
                )
            title = title or f"{trace.header.get('episode', '')}: {goal}"

        if title:
            ax.set_title(title, fontsize=9)
        ax.set_xlim(extent[0], extent[1])
        ax.set_ylim(extent[2], extent[3])
        ax.set_aspect("equal")
        ax.set_xticks([])
        ax.set_yticks([])
        fig.savefig(out_path, format="svg", metadata={"Date": None}, bbox_inches="tight")
        plt.close(fig)
    write(f"Wrote {out_path}", debug=True)


def _draw_scene(ax, scene, shape, res):
    rooms = scene.get("rooms", [])
    colors = _room_colors(len(rooms))
    overlay = np.zeros(shape + (4,))
    centers = {}
    for room, color in zip(rooms, colors):
        mask = decode_mask(room["mask"], shape)
        overlay[mask] = (color[0], color[1], color[2], 0.35)
        ys, xs = np.nonzero(mask)
        if len(xs):
            centers[room["id"]] = ((xs.mean() + 0.5) * res, (ys.mean() + 0.5) * res)
    ax.imshow(
        overlay,
        origin="lower",
        extent=(0, shape[1] * res, 0, shape[0] * res),
        interpolation="nearest",
    )
    for rid, (cx, cy) in sorted(centers.items()):
        label = next(r["category"] for r in rooms if r["id"] == rid)
        ax.text(cx, cy, f"R{rid} {label}", fontsize=7, ha="center", va="center")

    edges = scene.get("edges", {})
    for a, b in edges.get("r_r", []):
        if a in centers and b in centers:
            (x0, y0), (x1, y1) = centers[a], centers[b]
            ax.plot([x0, x1], [y0, y1], color="black", linewidth=1.5, linestyle="--")

    vps = {v["id"]: v["position"] for v in scene.get("viewpoints", [])}
    objs = {}
    for o in scene.get("objects", []):
        cells = np.array(o["cells"], dtype=float)
        objs[o["id"]] = ((cells[:, 0].mean() + 0.5) * res, (cells[:, 1].mean() + 0.5) * res)

    for v, o in edges.get("v_o", []):
        if v in vps and o in objs:
            ax.plot(
                [vps[v][0], objs[o][0]],
                [vps[v][1], objs[o][1]],
                color="tab:gray",
                linewidth=0.4,
            )
    if vps:
        pts = np.array([vps[k] for k in sorted(vps)])
        ax.scatter(pts[:, 0], pts[:, 1], s=12, color="tab:blue", zorder=3)
    for o in scene.get("objects", []):
        x, y = objs[o["id"]]
        ax.scatter([x], [y], s=18, marker="s", color="tab:green", zorder=4)
        ax.text(x, y + 0.15, o["category"], fontsize=6, ha="center")
