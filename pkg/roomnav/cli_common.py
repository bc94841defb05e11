"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php
"""

import argparse

from roomnav.base_autonomy import PRESETS

# --- verbose_parser ----------------------------------------------------------

verbose_parser = argparse.ArgumentParser(add_help=False)

qv_group = verbose_parser.add_mutually_exclusive_group()
qv_group.add_argument(
    "-v",
    "--verbose",
    action="count",
    default=3,
    help="increment verbosity by one (default: %(default)s, range: 0..6)",
)
qv_group.add_argument(
    "-q", "--quiet", default=0, action="count", help="decrement verbosity by one"
)
verbose_parser.add_argument(
    "--debug",
    action="append",
    choices=["policy", "planner", "reasoner", "sense", "episode"],
    help="enable additional specific logging (requires -v)",
)


# --- common_parser ----------------------------------------------------------


common_parser = argparse.ArgumentParser(add_help=False)

common_parser.add_argument(
    "--config",
    metavar="FILE",
    help="YAML configuration (default: search `pyroomnav.yaml` in the current "
    "folder and its parents, else built-in defaults)",
)
common_parser.add_argument(
    "--progress",
    action="store_true",
    default=False,
    help="show progress info, even if redirected or verbose < 3",
)
common_parser.add_argument(
    "--no-color", action="store_true", help="prevent use of ansi terminal color codes"
)


# --- suite_parser -----------------------------------------------------------


suite_parser = argparse.ArgumentParser(add_help=False)

suite_parser.add_argument(
    "--suite", metavar="FILE", required=True, help="episode suite (JSON)"
)
suite_parser.add_argument(
    "--profile",
    help="embodiment profile, or a comma separated list to sweep "
    "(presets: {}; default: `bench.profile`)".format(", ".join(PRESETS)),
)
suite_parser.add_argument("--seed", type=int, help="added to every episode seed")
suite_parser.add_argument(
    "--parallel", type=int, help="number of worker processes (default: `bench.parallel`)"
)
suite_parser.add_argument(
    "--timeout-scale", type=float, help="multiply episode timeouts by this factor"
)
suite_parser.add_argument(
    "--out",
    metavar="DIR",
    default="results",
    help="output folder for metrics.json and episodes.csv (default: %(default)s)",
)
suite_parser.add_argument(
    "--traces", action="store_true", help="write one JSON-lines trace per episode"
)
suite_parser.add_argument(
    "--report-problems",
    action="store_true",
    help="return exit code 10 if any episode crashed",
)


# --- reasoner_parser --------------------------------------------------------


reasoner_parser = argparse.ArgumentParser(add_help=False)

reasoner_parser.add_argument(
    "--reasoner",
    choices=["oracle", "remote"],
    help="semantic reasoner (default: `reasoner.kind`)",
)
reasoner_parser.add_argument(
    "--no-keyring",
    action="store_true",
    help="prevent use of the system keyring service for credential lookup",
)
reasoner_parser.add_argument(
    "--no-netrc",
    action="store_true",
    help="prevent use of .netrc file for credential lookup",
)
