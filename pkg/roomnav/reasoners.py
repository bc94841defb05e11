"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

Semantic reasoning contract: query contexts, the priors table, the
rule-based oracle and the `make_reasoner` factory.
"""

import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from roomnav.gridworld import DEFAULT_RELATION_RULES, UNSUPPORTED, relation_holds
from roomnav.map_io import MapFormatError, read_json
from roomnav.util import DEBUG_FLAGS, get_option, str_to_bool, write

#: Attribute could not be determined
UNKNOWN = "unknown"
#: Room category could not be determined
UNLABELED = "unlabeled"
#: No uncovered room left to select
EXHAUSTED = "exhausted"

DEFAULT_PRIORS_PATH = os.path.join(os.path.dirname(__file__), "data", "default_priors.json")

#: Value vocabularies used to produce wrong answers in adversarial mode
ATTRIBUTE_VALUES = {
    "color": ("red", "blue", "green", "white", "black", "brown", "yellow", "gray"),
    "material": ("wood", "metal", "fabric", "plastic"),
}


# ===============================================================================
# PriorsTable
# ===============================================================================
class PriorsTable:
    """Object category -> room category likelihoods plus relation rules."""

    def __init__(self, priors, *, relations=None, early_stop_margin=0.1, room_types=None):
        self.priors = {cat: dict(row) for cat, row in priors.items()}
        self.relations = dict(DEFAULT_RELATION_RULES if relations is None else relations)
        self.early_stop_margin = float(early_stop_margin)
        if room_types is None:
            room_types = sorted({rt for row in self.priors.values() for rt in row})
        self.room_types = list(room_types)
        for cat, row in self.priors.items():
            if not any(w > 0 for w in row.values()):
                raise ValueError(f"Priors row {cat!r} has no nonzero weight")
            for rt, w in row.items():
                if not 0 <= w <= 1:
                    raise ValueError(f"Prior {cat}/{rt} = {w} is not in [0, 1]")

    def __repr__(self):
        return f"PriorsTable<{len(self.priors)} categories x {len(self.room_types)} rooms>"

    @classmethod
    def load(cls, path):
        data = read_json(path)
        try:
            return cls(
                data["priors"],
                relations=data.get("relations"),
                early_stop_margin=data.get("early_stop_margin", 0.1),
                room_types=data.get("room_types"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise MapFormatError(f"{path}: invalid priors table: {e}") from e

    @classmethod
    def load_default(cls):
        return cls.load(DEFAULT_PRIORS_PATH)

    def prior(self, category, room_category):
        """Return prior(category | room_category).

        Unlabeled rooms get the mean over all room types.
        """
        row = self.priors.get(category)
        if not row:
            return 0.0
        if room_category in (None, UNLABELED):
            return sum(row.get(rt, 0.0) for rt in self.room_types) / max(
                1, len(self.room_types)
            )
        return row.get(room_category, 0.0)


# ===============================================================================
# Contexts
# ===============================================================================
def _observation_payload(obs):
    return {
        "pose": [round(v, 4) for v in obs.pose],
        "visible_cells": len(obs),
        "detections": [
            {
                "category": d.category,
                "confidence": round(d.confidence, 4),
                "bbox": _bbox(d.cells),
            }
            for d in obs.detections
        ],
    }


def _bbox(cells):
    xs = [c[0] for c in cells]
    ys = [c[1] for c in cells]
    return [min(xs), min(ys), max(xs), max(ys)]


@dataclass
class EarlyStopContext:
    """Current and newly discovered room, each {id, category, objects}."""

    current: dict
    new: dict
    goal: object

    variant = "early_stop"

    def to_payload(self):
        return {"current_room": self.current, "new_room": self.new}


@dataclass
class RoomQueryContext:
    """Uncovered rooms [{id, category, distance, objects}] and the room trajectory."""

    rooms: list
    trajectory: list
    goal: object
    current: object = None

    variant = "room_query"

    def to_payload(self):
        return {
            "uncovered_rooms": self.rooms,
            "trajectory": list(self.trajectory),
            "current_room": self.current,
        }


@dataclass
class RoomLabelContext:
    """Best-view observation restricted to a room's cells."""

    observation: object
    room_id: int
    xs: np.ndarray
    ys: np.ndarray
    goal: object = None

    variant = "room_label"

    def to_payload(self):
        d = _observation_payload(self.observation)
        d["room_id"] = self.room_id
        d["room_cells"] = int(len(self.xs))
        return d


@dataclass
class AttributeQueryContext:
    observation: object
    category: str
    name: str
    object_id: int
    cells: frozenset
    goal: object = None

    variant = "attribute"

    def to_payload(self):
        d = _observation_payload(self.observation)
        d.update(
            {
                "object_id": self.object_id,
                "category": self.category,
                "attribute": self.name,
                "bbox": _bbox(self.cells),
            }
        )
        return d


@dataclass
class RelationQueryContext:
    observation: object
    pair: tuple
    cells: tuple
    relation: str
    categories: tuple = ()
    goal: object = None

    variant = "relation"

    def to_payload(self):
        d = _observation_payload(self.observation)
        d.update(
            {
                "pair": list(self.pair),
                "categories": list(self.categories),
                "relation": self.relation,
                "bboxes": [_bbox(c) for c in self.cells],
            }
        )
        return d


#: Payload keys per variant, used to validate logged queries
CONTEXT_SCHEMA = {
    "early_stop": {"current_room", "new_room"},
    "room_query": {"uncovered_rooms", "trajectory", "current_room"},
    "room_label": {"pose", "visible_cells", "detections", "room_id", "room_cells"},
    "attribute": {
        "pose",
        "visible_cells",
        "detections",
        "object_id",
        "category",
        "attribute",
        "bbox",
    },
    "relation": {
        "pose",
        "visible_cells",
        "detections",
        "pair",
        "categories",
        "relation",
        "bboxes",
    },
}


def _distance(room):
    """Sort key for a room entry; unreachable rooms (None) come last."""
    d = room.get("distance")
    return float("inf") if d is None else d


# ===============================================================================
# BaseReasoner
# ===============================================================================
class BaseReasoner:
    """Answers the five semantic query kinds.

    Implementations are stateless between calls apart from a seeded rng.
    """

    def __init__(self, priors):
        self.priors = priors

    def __repr__(self):
        return f"{self.__class__.__name__}<{self.priors!r}>"

    def decide(self, ctx):
        """Dispatch a context to its handler."""
        handler = getattr(self, "on_" + ctx.variant)
        return handler(ctx)

    def on_early_stop(self, ctx):
        return self.decide_early_stop(ctx)

    def on_room_query(self, ctx):
        return self.select_room(ctx)

    def on_room_label(self, ctx):
        return self.classify_room(ctx)

    def on_attribute(self, ctx):
        return self.infer_attributes(ctx)

    def on_relation(self, ctx):
        return self.check_relation(ctx)

    def decide_early_stop(self, ctx):
        raise NotImplementedError

    def select_room(self, ctx):
        raise NotImplementedError

    def classify_room(self, ctx):
        raise NotImplementedError

    def infer_attributes(self, ctx):
        raise NotImplementedError

    def check_relation(self, ctx):
        raise NotImplementedError

    def fallback(self, ctx):
        """Conservative answer used when a query cannot be answered."""
        if ctx.variant == "early_stop":
            return False
        elif ctx.variant == "room_query":
            return self.nearest_room(ctx)
        elif ctx.variant == "room_label":
            return UNLABELED
        return UNKNOWN

    # --- Rules shared by the oracle and the remote fallbacks ---

    def prior_rule_early_stop(self, ctx):
        target = ctx.goal.category
        if target in ctx.new.get("objects", []):
            return True
        p_new = self.priors.prior(target, ctx.new.get("category"))
        p_cur = self.priors.prior(target, ctx.current.get("category"))
        return p_new > p_cur + self.priors.early_stop_margin

    @staticmethod
    def nearest_room(ctx):
        if not ctx.rooms:
            return EXHAUSTED
        return min(ctx.rooms, key=lambda r: (_distance(r), r["id"]))["id"]


class OracleReasoner(BaseReasoner):
    """Rule-based reasoner reading ground truth from the simulator map.

    Args:
        grid_map (GridMap): ground truth
        priors (PriorsTable):
        seed (int): seeds the noise rng
        attribute_error_rate (float): probability of a wrong attribute
        room_confusion (float): probability of a wrong room label
    """

    def __init__(
        self, grid_map, priors, *, seed=0, attribute_error_rate=0.0, room_confusion=0.0
    ):
        super().__init__(priors)
        self.grid_map = grid_map
        self.attribute_error_rate = float(attribute_error_rate)
        self.room_confusion = float(room_confusion)
        self.rng = np.random.default_rng(seed)

    def decide_early_stop(self, ctx):
        return self.prior_rule_early_stop(ctx)

    def select_room(self, ctx):
        """Argmax of the target prior; ties by path distance, then lower id."""
        if not ctx.rooms:
            return EXHAUSTED
        target = ctx.goal.category
        best = min(
            ctx.rooms,
            key=lambda r: (
                -self.priors.prior(target, r.get("category")),
                _distance(r),
                r["id"],
            ),
        )
        return best["id"]

    def classify_room(self, ctx):
        """Majority ground-truth room label among the context cells."""
        gt = self.grid_map.rooms_gt[ctx.ys, ctx.xs]
        counts = Counter(
            self.grid_map.room_label(int(r)) for r in gt.tolist() if r >= 0
        )
        counts.pop(None, None)
        if not counts:
            return UNLABELED
        label = min(counts, key=lambda lab: (-counts[lab], lab))
        if self.room_confusion > 0 and self.rng.random() < self.room_confusion:
            alt = [rt for rt in self.priors.room_types if rt != label]
            if alt:
                label = alt[int(self.rng.integers(len(alt)))]
        return label

    def _instance_for(self, obs, cells):
        """Return the ground-truth instance whose detection overlaps `cells`."""
        best = None
        best_n = 0
        for det in obs.detections:
            n = len(det.cells & cells)
            if n > best_n:
                best, best_n = det, n
        if best is None:
            return None
        return self.grid_map.get_object(best.instance_id)

    def infer_attributes(self, ctx):
        inst = self._instance_for(ctx.observation, ctx.cells)
        if inst is None:
            return UNKNOWN
        value = inst.attributes.get(ctx.name)
        if value is None:
            return UNKNOWN
        if self.attribute_error_rate > 0 and self.rng.random() < self.attribute_error_rate:
            vocab = ATTRIBUTE_VALUES.get(ctx.name, ())
            alt = [v for v in vocab if v != value] or [f"not-{value}"]
            value = alt[int(self.rng.integers(len(alt)))]
        return value

    def check_relation(self, ctx):
        """Evaluate the relation rule on ground-truth footprints.

        Returns:
            True / False, UNSUPPORTED for unconfigured relations, UNKNOWN if
            an object is not in the observation.
        """
        if ctx.relation not in self.priors.relations:
            return UNSUPPORTED
        a = self._instance_for(ctx.observation, ctx.cells[0])
        b = self._instance_for(ctx.observation, ctx.cells[1])
        if a is None or b is None:
            return UNKNOWN
        res = relation_holds(
            ctx.relation,
            a.cells,
            b.cells,
            self.grid_map.resolution,
            self.priors.relations,
        )
        if "reasoner" in DEBUG_FLAGS:
            write(f"relation {a.category} {ctx.relation} {b.category}: {res}", debug=True)
        return res


@dataclass
class QueryRecord:
    variant: str
    payload: dict
    decision: object
    extra: dict = field(default_factory=dict)


def load_priors(config):
    """Return the PriorsTable configured by `config['reasoner']`."""
    rc = config["reasoner"]
    priors = PriorsTable.load(rc["priors"]) if rc["priors"] else PriorsTable.load_default()
    priors.early_stop_margin = float(rc["early_stop_margin"])
    return priors


def make_reasoner(config, grid_map, *, seed=0, priors=None):
    """Factory that returns a reasoner for `config['reasoner']['kind']`."""
    rc = config["reasoner"]
    if priors is None:
        priors = load_priors(config)
    kind = rc["kind"]
    if kind == "oracle":
        return OracleReasoner(
            grid_map,
            priors,
            seed=seed,
            attribute_error_rate=rc["attribute_error_rate"],
            room_confusion=rc["room_confusion"],
        )
    elif kind == "remote":
        from roomnav.remote_reasoner import RemoteReasoner

        url = rc["url"] or get_option("PYROOMNAV_REASONER_URL", "reasoner", "url")
        if not url:
            raise ValueError(
                "Remote reasoner needs `reasoner.url` or PYROOMNAV_REASONER_URL"
            )
        timeout = float(
            get_option("PYROOMNAV_REASONER_TIMEOUT", "reasoner", "timeout", rc["timeout"])
        )
        opts = dict(rc)
        for key in ("no_keyring", "no_netrc"):
            val = get_option(f"PYROOMNAV_{key.upper()}", "reasoner", key)
            if val is not None and not opts.get(key):
                opts[key] = str_to_bool(val)
        return RemoteReasoner(url, priors, timeout=timeout, opts=opts)
    raise ValueError(f"Unknown reasoner kind {kind!r}")
