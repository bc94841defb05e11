# -*- coding: utf-8 -*-
"""
Tests for pyroomnav
"""
# flake8: noqa: E501
import json
import math
import os
import unittest

from roomnav.bench import (
    SuiteMetrics,
    SuiteRunner,
    compute_at,
    compute_spl,
    compute_spt,
    compute_sr,
    metrics_report,
    read_csv,
    run_baseline_flat,
    run_suite,
    trace_file_name,
    write_csv,
    write_metrics,
)
from roomnav.episode import EpisodeResult, EpisodeTrace
from roomnav.gridworld import EpisodeSpec, Goal
from roomnav.map_io import save_map
from tests.fixture_tools import CaptureStdout, _TempFolderTestBase, block_cells, room_map, test_config


def _result(rid, success, *, traveled=10.0, shortest=10.0, elapsed=60.0, timeout=240.0, tier=""):
    return EpisodeResult(
        id=rid,
        tier=tier,
        success=success,
        declared=success,
        traveled=traveled,
        shortest=shortest,
        elapsed=elapsed,
        timeout=timeout,
    )


#: (success, traveled, shortest, elapsed, timeout) rows -> (SPL, SPT), hand-computed
METRIC_CASES = [
    ([(True, 10, 10, 60, 240)], (100.0, 75.0)),
    ([(True, 20, 10, 120, 240)], (50.0, 50.0)),
    ([(False, 20, 10, 120, 240)], (0.0, 0.0)),
    ([(True, 10, 10, 0, 240), (False, 5, 10, 240, 240)], (50.0, 50.0)),
    ([(True, 12, 8, 30, 120), (True, 8, 8, 90, 120)], (500 / 6, 50.0)),
    ([(True, 4, 5, 10, 100)], (100.0, 90.0)),
    ([(True, 0, 0, 0, 60)], (100.0, 100.0)),
    ([(True, 10, math.inf, 30, 60)], (0.0, 50.0)),
    ([(True, 10, 10, 300, 240)], (100.0, 0.0)),
    (
        [(True, 15, 10, 40, 200), (True, 30, 10, 100, 200), (False, 50, 10, 200, 200), (True, 10, 10, 20, 200)],
        (50.0, 55.0),
    ),
    (
        [(True, 7, 7, 30, 60), (False, 7, 7, 60, 60), (True, 3, 3, 15, 60), (False, 9, 9, 60, 60), (True, 2, 2, 45, 60)],
        (60.0, 30.0),
    ),
    ([(True, 12, 6, 0, 180), (True, 6, 6, 0, 90), (False, 6, 6, 0, 90)], (50.0, 200 / 3)),
]


# ===============================================================================
# MetricsTest
# ===============================================================================
class MetricsTest(unittest.TestCase):
    def test_sr(self):
        assert compute_sr([_result("a", True), _result("b", False)]) == 50.0
        assert compute_sr([_result("a", True)]) == 100.0
        assert compute_sr([]) == 0.0

    def test_spl(self):
        assert compute_spl([_result("a", True)]) == 100.0
        assert compute_spl([_result("a", True, traveled=20.0)]) == 50.0
        # Shorter than the oracle path (start inside the goal region)
        assert compute_spl([_result("a", True, traveled=5.0)]) == 100.0
        assert compute_spl([_result("a", True, traveled=0.0, shortest=0.0)]) == 100.0
        assert compute_spl([_result("a", False), _result("b", True, traveled=20.0)]) == 25.0
        assert compute_spl([_result("a", True, shortest=math.inf)]) == 0.0
        assert compute_spl([]) == 0.0

    def test_spl_equals_sr_on_optimal_paths(self):
        results = [_result("a", True), _result("b", False), _result("c", True)]
        assert abs(compute_spl(results) - compute_sr(results)) < 1e-9

    def test_spt(self):
        assert compute_spt([_result("a", True, elapsed=60.0)]) == 75.0
        assert compute_spt([_result("a", True, elapsed=0.0)]) == 100.0
        assert compute_spt([_result("a", True, elapsed=240.0)]) == 0.0
        assert compute_spt([_result("a", True, elapsed=300.0)]) == 0.0
        assert compute_spt([_result("a", False, elapsed=10.0)]) == 0.0
        results = [_result("a", True, elapsed=0.0), _result("b", False)]
        assert compute_spt(results) == compute_sr(results)

    def test_constructed_result_sets(self):
        assert len(METRIC_CASES) == 12
        for k, (rows, (spl, spt)) in enumerate(METRIC_CASES):
            results = [
                _result(f"r{i}", ok, traveled=p, shortest=sp, elapsed=t, timeout=limit)
                for i, (ok, p, sp, t, limit) in enumerate(rows)
            ]
            assert abs(compute_spl(results) - spl) < 1e-9, (k, compute_spl(results))
            assert abs(compute_spt(results) - spt) < 1e-9, (k, compute_spt(results))
            sr = compute_sr(results)
            if all(r.traveled == r.shortest for r in results):
                assert abs(compute_spl(results) - sr) < 1e-9, k
            if all(r.elapsed == 0 for r in results):
                assert abs(compute_spt(results) - sr) < 1e-9, k

    def test_at(self):
        results = [_result("a", True, elapsed=10.0), _result("b", True, elapsed=30.0)]
        assert compute_at(results + [_result("c", False, elapsed=99.0)]) == 20.0
        assert compute_at([_result("c", False)]) is None

    def test_suite_metrics(self):
        results = [
            _result("b", False, tier="hard"),
            _result("a", True, traveled=20.0, tier="easy"),
        ]
        m = SuiteMetrics.from_results(results)
        assert m.n == 2
        assert m.sr == 50.0
        assert m.spl == 25.0
        assert m.spt == 37.5
        assert m.at == 60.0
        assert m.mean_traveled == 15.0
        assert str(m) == "N=2, SR 50.0%, SPL 25.0%, SPT 37.5%, AT 60.0s"

        empty = SuiteMetrics.from_results([])
        assert empty.n == 0
        assert empty.sr is None and empty.at is None
        assert str(empty) == "N=0"

        report = metrics_report(results)
        assert sorted(report["tiers"]) == ["easy", "hard"]
        assert report["tiers"]["easy"]["sr"] == 100.0
        assert report["tiers"]["hard"]["at"] is None
        assert report["overall"] == m.to_dict()

    def test_trace_file_name(self):
        assert trace_file_name("easy_0001") == "easy_0001.jsonl"
        assert trace_file_name("a/b c") == "a_b_c.jsonl"


# ===============================================================================
# ResultFileTest
# ===============================================================================
class ResultFileTest(_TempFolderTestBase):
    def test_csv(self):
        r = _result("a", True, shortest=math.inf)
        r.room_visits = [0, 2, 1]
        r.stats = {"ticks": 3}
        path = self.path("results.csv")
        write_csv([r, _result("b", False)], path)
        a, b = read_csv(path)
        assert a == r
        assert a.shortest == math.inf
        assert b.room_visits == []
        assert not b.success

    def test_csv_missing_columns(self):
        path = self.path("results.csv")
        with open(path, "w") as f:
            f.write("id,success\na,1\n")
        with self.assertRaisesRegex(ValueError, "missing columns"):
            read_csv(path)

    def test_metrics_file(self):
        path = self.path("metrics.json")
        write_metrics(metrics_report([_result("a", True)]), path)
        with open(path) as f:
            data = json.load(f)
        assert data["overall"]["sr"] == 100.0
        assert data["overall"]["spt"] == 75.0


# ===============================================================================
# SuiteRunnerTest
# ===============================================================================
class SuiteRunnerTest(_TempFolderTestBase):
    def setUp(self):
        super().setUp()
        chair = {"id": 1, "category": "chair", "cells": block_cells(32, 22, 2, 2)}
        self.map_path = self.path("room.json")
        save_map(room_map(objects=[chair]), self.map_path)
        start = (2.05, 1.55, 0.0)
        self.episodes = [
            EpisodeSpec("ep_b", self.map_path, start, Goal("chair"), 60.0, seed=2, tier="easy"),
            EpisodeSpec("ep_a", self.path("missing.json"), start, Goal("chair"), 60.0, tier="easy"),
        ]
        self.config = test_config()

    def test_run_suite(self):
        trace_dir = self.path("traces")
        with CaptureStdout():
            metrics, results = run_suite(
                self.episodes, self.config, options={"trace_dir": trace_dir}
            )
        assert [r.id for r in results] == ["ep_a", "ep_b"]
        failed, ok = results
        assert failed.end_reason == "error"
        assert "missing.json" in failed.error
        assert ok.success
        assert metrics.n == 2
        assert metrics.sr == 50.0
        assert metrics.errors == 1
        assert os.listdir(trace_dir) == ["ep_b.jsonl"]
        trace = EpisodeTrace.read(os.path.join(trace_dir, "ep_b.jsonl"))
        assert trace.header["episode"] == "ep_b"

    def test_runner_stats(self):
        runner = SuiteRunner(self.config, {"verbose": 4, "no_color": True})
        with CaptureStdout() as out:
            runner.run(self.episodes[:1])
        stats = runner.get_stats()
        assert stats["episodes"] == stats["episodes_finished"] == stats["successes"] == 1
        assert stats["elap_secs"] >= 0
        assert any("ep_b" in line for line in out)
        assert runner.metrics().sr == 100.0

    def test_baseline_flat(self):
        with CaptureStdout():
            metrics, results = run_baseline_flat(self.episodes[:1], self.config)
        assert results[0].navigator == "flat"
        assert metrics.sr == 100.0
