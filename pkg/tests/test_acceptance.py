# -*- coding: utf-8 -*-
"""
Tests for pyroomnav

Long-running benchmark checks. Enable with
    PYROOMNAV_ACCEPTANCE=1 pytest tests/test_acceptance.py
"""
# flake8: noqa: E501
import itertools
import os
import unittest

import numpy as np

from roomnav.base_autonomy import PRESETS
from roomnav.bench import metrics_report, run_baseline_flat, run_suite, trace_file_name, write_metrics
from roomnav.episode import EpisodeTrace, run_episode
from roomnav.grid_utils import FREE, OCCUPIED
from roomnav.gridworld import EpisodeSpec, Goal, check_success, sense
from roomnav.in_room_explorer import find_two_opt_move, solve_open_tour, tour_cost
from roomnav.map_gen import generate_map, generate_suite
from roomnav.map_io import load_episodes, load_map
from roomnav.reasoners import load_priors
from roomnav.scene_rep import SceneRep
from roomnav.util import get_option, str_to_bool
from tests.fixture_tools import CaptureStdout, _TempFolderTestBase, room_map, test_config
from tests.reasoner_stub_server import start_stub_server

ACCEPTANCE = str_to_bool(get_option("PYROOMNAV_ACCEPTANCE", "test", "acceptance", "0"))

WHEELED = PRESETS["wheeled"]


def _brute_force(dist):
    return min(tour_cost(dist, list(p)) for p in itertools.permutations(range(1, len(dist))))


def _snake(steps, rng, *, x_min=2, x_max=197, rows=(15, 45)):
    """Cells of a back-and-forth walk with random 0..3 cell strides."""
    cells = []
    x = x_min
    for i in range(steps):
        if i < steps // 2:
            y = rows[0]
            x = min(x + int(rng.integers(0, 4)), x_max)
        else:
            if i == steps // 2:
                x = x_max
            y = rows[1]
            x = max(x - int(rng.integers(0, 4)), x_min)
        cells.append((x, y))
    return cells


# ===============================================================================
# TourAcceptanceTest
# ===============================================================================
@unittest.skipUnless(ACCEPTANCE, "set PYROOMNAV_ACCEPTANCE=1 to run")
class TourAcceptanceTest(unittest.TestCase):
    def test_restarts_match_optimum(self):
        rng = np.random.default_rng(42)
        optimal = 0
        for _ in range(200):
            n = int(rng.integers(2, 9))
            pts = rng.uniform(0, 10, size=(n + 1, 2))
            dist = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
            tour, cost = solve_open_tour(dist, restarts=16, seed=0)
            best = _brute_force(dist)
            assert cost >= best - 1e-9
            assert find_two_opt_move(dist, tour) is None
            if abs(cost - best) < 1e-9:
                optimal += 1
        assert optimal >= 190, optimal


# ===============================================================================
# SceneAcceptanceTest
# ===============================================================================
@unittest.skipUnless(ACCEPTANCE, "set PYROOMNAV_ACCEPTANCE=1 to run")
class SceneAcceptanceTest(unittest.TestCase):
    def test_viewpoint_admission_matches_recount(self):
        gm = room_map(200, 60)
        config = test_config()
        rep = SceneRep.from_config(gm.cells.shape, config)
        r2 = (config["scene"]["d_cover"] / gm.resolution) ** 2
        eps = config["scene"]["viewpoint_eps"]
        union = set()
        admitted = rejected = 0
        for cell in _snake(200, np.random.default_rng(7)):
            pose = gm.center_of(cell) + (0.0,)
            obs = sense(gm, pose, WHEELED)
            rep.integrate_observation(obs)
            vid = rep.maybe_add_viewpoint(pose, obs)

            ox, oy = obs.origin
            cov = {
                c for c, _label in obs.visible_cells
                if (c[0] - ox) ** 2 + (c[1] - oy) ** 2 < r2
            }
            expected = len(cov - union) > eps
            assert (vid is not None) == expected, (cell, len(cov - union))
            if expected:
                union |= cov
                admitted += 1
            else:
                rejected += 1
        assert len(rep.viewpoints) == admitted
        assert admitted >= 10 and rejected >= 10, (admitted, rejected)

    def test_segmentation_of_generated_maps(self):
        layouts = itertools.cycle([(1, 1), (3, 1), (2, 2)])
        correct = 0
        majority = total = 0
        for seed, (nx, ny) in zip(range(50), layouts):
            gm = generate_map(seed, {"rooms_x": nx, "rooms_y": ny})
            rep = SceneRep.from_config(gm.cells.shape, test_config())
            rep.known[:] = np.where(gm.occupied, OCCUPIED, FREE)
            rep.segment_rooms()
            if len(rep.rooms) == len(gm.room_labels):
                correct += 1
            for room in rep.rooms.values():
                owners = gm.rooms_gt[room.mask]
                owners = owners[owners >= 0]
                if owners.size:
                    majority += int(np.bincount(owners).max())
                    total += int(owners.size)
        assert correct >= 48, correct
        assert majority / total >= 0.9, majority / total

    def test_pocket_free_rooms_are_covered(self):
        params = {"object_density": 0.0, "room_size_range": (3.5, 8.0)}
        low = []
        for seed in range(20):
            gm = generate_map(seed, params)
            x0, y0, x1, y1 = gm.room_rects[0][0]
            start = gm.center_of(((x0 + x1) // 2, (y0 + y1) // 2)) + (0.0,)
            spec = EpisodeSpec(f"cover_{seed:04d}", "", start, Goal("bed"), 600.0, seed=seed)
            result, _trace = run_episode(gm, spec, test_config(), trace=False)
            assert result.end_reason == "exhausted", (seed, result.end_reason)
            if result.stats["surface_coverage"] < 0.98:
                low.append((seed, result.stats["surface_coverage"]))
        assert not low, low


# ===============================================================================
# SuiteAcceptanceTest
# ===============================================================================
@unittest.skipUnless(ACCEPTANCE, "set PYROOMNAV_ACCEPTANCE=1 to run")
class SuiteAcceptanceTest(_TempFolderTestBase):
    def _suite(self, name, **kw):
        with CaptureStdout():
            path = generate_suite(self.path(name), **kw)
        return load_episodes(path)

    def test_end_to_end(self):
        episodes = self._suite("mixed", seed=0, count=100)
        with CaptureStdout():
            metrics, results = run_suite(episodes, test_config(), parallelism=4)
        assert metrics.sr == 100.0, [r.id for r in results if not r.success]
        # No success declared away from the goal
        assert not [r.id for r in results if r.end_reason == "declared"]

    def test_constraints(self):
        config = test_config()
        rules = load_priors(config).relations
        reach = config["world"]["success_distance"] + 1e-3
        for mode in ("attribute", "relation"):
            episodes = self._suite(mode, seed=100, count=30, constraints=mode)
            trace_dir = self.path(f"traces_{mode}")
            with CaptureStdout():
                metrics, results = run_suite(
                    episodes, config, parallelism=4, options={"trace_dir": trace_dir}
                )
            assert metrics.sr >= 95.0, (mode, metrics)

            specs = {spec.id: spec for spec in episodes}
            for r in results:
                if not r.success:
                    continue
                spec = specs[r.id]
                trace = EpisodeTrace.read(os.path.join(trace_dir, trace_file_name(r.id)))
                pose = trace.events[-1]["pose"]
                gm = load_map(spec.map_ref)
                assert check_success(pose, spec.goal, gm, reach, rules), r.id

        # A reasoner that gets every attribute wrong cannot satisfy color constraints
        episodes = self._suite("attribute_bad", seed=100, count=30, constraints="attribute")
        config = test_config(reasoner={"attribute_error_rate": 1.0})
        with CaptureStdout():
            metrics, _results = run_suite(episodes, config, parallelism=4)
        assert metrics.sr <= 5.0, metrics

    def test_hierarchical_beats_flat(self):
        episodes = self._suite("hard", seed=200, count=30, tier="hard")
        config = test_config()
        with CaptureStdout():
            _m, hier = run_suite(episodes, config, parallelism=4)
            _m, flat = run_baseline_flat(episodes, config, parallelism=4)
        hier_len = np.mean([r.traveled for r in hier])
        flat_len = np.mean([r.traveled for r in flat])
        assert hier_len <= 0.8 * flat_len, (hier_len, flat_len)

    def test_deterministic_and_parallel(self):
        episodes = self._suite("det", seed=300, count=16)
        config = test_config()
        blobs = []
        for i, parallelism in enumerate((1, 1, 8)):
            with CaptureStdout():
                _m, results = run_suite(episodes, config, parallelism=parallelism)
            path = self.path(f"metrics_{i}.json")
            write_metrics(metrics_report(results), path)
            with open(path, "rb") as f:
                blobs.append(f.read())
        assert blobs[0] == blobs[1] == blobs[2]

    def test_unreliable_remote_reasoner(self):
        episodes = self._suite("flaky", seed=400, count=20, tier="easy")
        with CaptureStdout():
            oracle, _results = run_suite(episodes, test_config(), parallelism=1)

        server = start_stub_server()
        try:
            server.mode = "flaky"
            config = test_config(
                reasoner={"kind": "remote", "url": server.url, "timeout": 5.0, "no_keyring": True, "no_netrc": True}
            )
            with CaptureStdout():
                remote, results = run_suite(episodes, config, parallelism=1)
        finally:
            server.shutdown()
            server.server_close()

        assert not [r.id for r in results if r.end_reason == "error"]
        assert len(server.requests) >= 10, len(server.requests)
        assert abs(remote.sr - oracle.sr) <= 20.0, (remote.sr, oracle.sr)
