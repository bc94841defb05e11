"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

Suite runner, metrics and result files.
"""

import csv
import functools
import json
import math
import os
import re
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass

from roomnav.episode import EpisodeResult, run_episode
from roomnav.map_io import load_map
from roomnav.util import IS_REDIRECTED, VT_ERASE_LINE, ansi_code, write, write_error

CSV_FIELDS = (
    "id",
    "tier",
    "navigator",
    "profile",
    "success",
    "declared",
    "elapsed",
    "traveled",
    "shortest",
    "timeout",
    "room_visits",
    "reasoner_queries",
    "end_reason",
    "error",
    "stats",
)

#: Number of decimals in metrics.json
METRIC_DIGITS = 6


# ===============================================================================
# Metrics
# ===============================================================================
def compute_sr(results):
    """Success rate in percent (0 for an empty list)."""
    if not results:
        return 0.0
    return 100.0 * sum(1 for r in results if r.success) / len(results)


def compute_spl(results):
    """Success weighted by shortest-to-actual path length, in percent.

    SPL = 1/N sum(S_i * l_i / max(p_i, l_i))
    """
    if not results:
        return 0.0
    total = 0.0
    for r in results:
        if not r.success or not math.isfinite(r.shortest):
            continue
        longest = max(r.traveled, r.shortest)
        total += 1.0 if longest <= 0 else r.shortest / longest
    return 100.0 * total / len(results)


def compute_spt(results):
    """Success penalized by elapsed time, averaged per episode, in percent.

    SPT = 1/N sum(S_i * (1 - t_i / T_i))
    """
    if not results:
        return 0.0
    total = 0.0
    for r in results:
        if not r.success or r.timeout <= 0:
            continue
        total += 1.0 - min(r.elapsed, r.timeout) / r.timeout
    return 100.0 * total / len(results)


def compute_at(results):
    """Mean elapsed seconds over successful episodes, or None."""
    times = [r.elapsed for r in results if r.success]
    if not times:
        return None
    return sum(times) / len(times)


def _round(v):
    return None if v is None else round(v, METRIC_DIGITS)


@dataclass
class SuiteMetrics:
    n: int = 0
    sr: float = None
    spl: float = None
    spt: float = None
    #: Seconds, over successful episodes
    at: float = None
    errors: int = 0
    mean_traveled: float = None
    mean_queries: float = None

    @classmethod
    def from_results(cls, results):
        """Aggregate `results` (order does not matter)."""
        results = sorted(results, key=lambda r: r.id)
        n = len(results)
        if n == 0:
            return cls()
        return cls(
            n=n,
            sr=_round(compute_sr(results)),
            spl=_round(compute_spl(results)),
            spt=_round(compute_spt(results)),
            at=_round(compute_at(results)),
            errors=sum(1 for r in results if r.error),
            mean_traveled=_round(sum(r.traveled for r in results) / n),
            mean_queries=_round(sum(r.reasoner_queries for r in results) / n),
        )

    def to_dict(self):
        return asdict(self)

    def __str__(self):
        if not self.n:
            return "N=0"

        def _fmt(v, unit):
            return "n.a." if v is None else f"{v:.1f}{unit}"

        return "N={}, SR {}, SPL {}, SPT {}, AT {}".format(
            self.n,
            _fmt(self.sr, "%"),
            _fmt(self.spl, "%"),
            _fmt(self.spt, "%"),
            _fmt(self.at, "s"),
        )


def metrics_report(results):
    """Return {'overall': {...}, 'tiers': {tier: {...}}}."""
    tiers = sorted({r.tier for r in results if r.tier})
    return {
        "overall": SuiteMetrics.from_results(results).to_dict(),
        "tiers": {
            t: SuiteMetrics.from_results([r for r in results if r.tier == t]).to_dict()
            for t in tiers
        },
    }


# ===============================================================================
# Result files
# ===============================================================================
def _result_to_row(r):
    return {
        "id": r.id,
        "tier": r.tier,
        "navigator": r.navigator,
        "profile": r.profile,
        "success": int(r.success),
        "declared": int(r.declared),
        "elapsed": repr(float(r.elapsed)),
        "traveled": repr(float(r.traveled)),
        "shortest": repr(float(r.shortest)),
        "timeout": repr(float(r.timeout)),
        "room_visits": " ".join(str(v) for v in r.room_visits),
        "reasoner_queries": r.reasoner_queries,
        "end_reason": r.end_reason,
        "error": r.error,
        "stats": json.dumps(r.stats, sort_keys=True),
    }


def _row_to_result(row):
    return EpisodeResult(
        id=row["id"],
        tier=row["tier"],
        navigator=row["navigator"],
        profile=row["profile"],
        success=row["success"] == "1",
        declared=row["declared"] == "1",
        elapsed=float(row["elapsed"]),
        traveled=float(row["traveled"]),
        shortest=float(row["shortest"]),
        timeout=float(row["timeout"]),
        room_visits=[int(v) for v in row["room_visits"].split()],
        reasoner_queries=int(row["reasoner_queries"]),
        end_reason=row["end_reason"],
        error=row["error"],
        stats=json.loads(row["stats"]) if row["stats"] else {},
    )


def write_csv(results, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in results:
            writer.writerow(_result_to_row(r))


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        missing = set(CSV_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {', '.join(sorted(missing))}")
        return [_row_to_result(row) for row in reader]


def write_metrics(report, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")


def trace_file_name(episode_id):
    return re.sub(r"[^A-Za-z0-9_.-]", "_", episode_id) + ".jsonl"


# ===============================================================================
# Worker
# ===============================================================================
@functools.lru_cache(maxsize=16)
def _cached_map(path):
    return load_map(path)


def _run_one(spec, config, navigator, profile, trace_dir):
    """Run a single episode; exceptions become failed results."""
    try:
        grid_map = _cached_map(spec.map_ref)
        result, trace = run_episode(
            grid_map,
            spec,
            config,
            navigator=navigator,
            profile=profile,
            trace=bool(trace_dir),
        )
        if trace_dir:
            trace.write(os.path.join(trace_dir, trace_file_name(spec.id)))
    except Exception as e:
        result = EpisodeResult(
            id=spec.id,
            tier=spec.tier,
            navigator=navigator,
            profile=profile.id if profile else config["bench"]["profile"],
            timeout=spec.timeout * config["bench"]["timeout_scale"],
            end_reason="error",
            error=f"{e.__class__.__name__}: {e}",
            stats={"traceback": traceback.format_exc(limit=4)},
        )
    return result


# ===============================================================================
# SuiteRunner
# ===============================================================================
class SuiteRunner:
    """Run a list of episodes, possibly in parallel, and aggregate the results.

    Args:
        config (dict): effective configuration
        options (dict): `navigator`, `profile` (EmbodimentProfile),
            `parallel`, `trace_dir`, `progress`, `verbose`
    """

    def __init__(self, config, options=None):
        self.config = config
        self.options = options or {}
        self.verbose = self.options.get("verbose", 3)
        self.navigator = self.options.get("navigator", "hierarchical")
        self.profile = self.options.get("profile")
        self.parallel = int(self.options.get("parallel") or config["bench"]["parallel"])
        self.trace_dir = self.options.get("trace_dir")
        self.results = []
        self._stats = {
            "episodes": 0,
            "episodes_finished": 0,
            "successes": 0,
            "errors": 0,
            "elap_secs": None,
        }

    def __repr__(self):
        return f"SuiteRunner<{self.navigator}, parallel={self.parallel}>"

    def _inc_stat(self, name, ofs=1):
        self._stats[name] = self._stats.get(name, 0) + ofs

    def get_stats(self):
        return self._stats.copy()

    def _tick(self):
        """Write progress info and move cursor to beginning of line."""
        if (self.verbose >= 3 and not IS_REDIRECTED) or self.options.get("progress"):
            stats = self.get_stats()
            sys.stdout.write(
                "Finished {}/{} episodes ({} successful)...\r".format(
                    stats["episodes_finished"], stats["episodes"], stats["successes"]
                )
            )
            sys.stdout.flush()

    def _on_result(self, result):
        self.results.append(result)
        self._inc_stat("episodes_finished")
        if result.success:
            self._inc_stat("successes")
        if result.error:
            self._inc_stat("errors")
            write_error(f"Episode {result.id} failed: {result.error}")
        if self.verbose >= 4:
            if self.options.get("no_color"):
                color = reset = ""
            else:
                color = ansi_code("Fore.GREEN" if result.success else "Fore.RED")
                reset = ansi_code("Style.RESET_ALL")
            write(
                "{}{}{:<10}{} {:<24} t={:6.1f}s  p={:6.1f}m  l={:6.1f}m  rooms={}".format(
                    "" if IS_REDIRECTED else VT_ERASE_LINE,
                    color,
                    result.end_reason,
                    reset,
                    result.id,
                    result.elapsed,
                    result.traveled,
                    result.shortest,
                    result.room_visits,
                )
            )
            if self.verbose >= 5:
                write(f"    {result.stats}")
        self._tick()

    def run(self, episodes):
        """Run `episodes` and return the list of EpisodeResult sorted by id."""
        start = time.monotonic()
        self.results = []
        self._stats["episodes"] = len(episodes)
        if self.trace_dir:
            os.makedirs(self.trace_dir, exist_ok=True)
        args = (self.config, self.navigator, self.profile, self.trace_dir)
        if self.parallel <= 1 or len(episodes) <= 1:
            for spec in episodes:
                self._on_result(_run_one(spec, *args))
        else:
            with ProcessPoolExecutor(max_workers=self.parallel) as pool:
                futures = {pool.submit(_run_one, spec, *args): spec for spec in episodes}
                for fut in as_completed(futures):
                    self._on_result(fut.result())
        if (self.verbose >= 3 and not IS_REDIRECTED) or self.options.get("progress"):
            sys.stdout.write(VT_ERASE_LINE + "\r")
        self.results.sort(key=lambda r: r.id)
        self._stats["elap_secs"] = time.monotonic() - start
        return self.results

    def metrics(self):
        return SuiteMetrics.from_results(self.results)

    def report(self):
        return metrics_report(self.results)


def run_suite(episodes, config, parallelism=1, *, navigator="hierarchical", options=None):
    """Run `episodes` and return (SuiteMetrics, results sorted by id)."""
    opts = dict(options or {})
    opts.update(navigator=navigator, parallel=parallelism)
    runner = SuiteRunner(config, opts)
    results = runner.run(episodes)
    return runner.metrics(), results


def run_baseline_flat(episodes, config, parallelism=1, *, options=None):
    """Same as `run_suite` with the room-agnostic frontier navigator."""
    return run_suite(episodes, config, parallelism, navigator="flat", options=options)
