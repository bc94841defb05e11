"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php
"""

import yaml

from roomnav.cli_common import verbose_parser
from roomnav.map_gen import DEFAULT_GEN_PARAMS, InfeasibleParamsError, generate_suite
from roomnav.util import CliSilentRuntimeError, write


def add_gen_maps_parser(subparsers):
    # --- Create the parser for the "gen-maps" command -------------------------

    parser = subparsers.add_parser(
        "gen-maps",
        parents=[verbose_parser],
        help="generate random maps and a solvable episode suite",
        allow_abbrev=False,
    )
    parser.add_argument("--seed", type=int, default=0, help="first seed (default: 0)")
    parser.add_argument(
        "--count", type=int, default=10, help="number of episodes (default: 10)"
    )
    parser.add_argument(
        "--tier",
        choices=["easy", "medium", "hard", "mixed"],
        default="mixed",
        help="difficulty tier; 'mixed' cycles through all (default: %(default)s)",
    )
    parser.add_argument(
        "--constraints",
        choices=["none", "attribute", "relation"],
        default="none",
        help="goal constraints (default: %(default)s)",
    )
    parser.add_argument(
        "--params",
        metavar="FILE",
        help="YAML file with generator parameters ({})".format(
            ", ".join(sorted(DEFAULT_GEN_PARAMS))
        ),
    )
    parser.add_argument("--out", metavar="DIR", required=True, help="output folder")

    parser.set_defaults(command=gen_maps_handler)
    return parser


def _read_params(parser, path):
    if not path:
        return None
    try:
        with open(path, encoding="utf-8-sig") as f:
            params = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        parser.error(f"Error reading {path}: {e}")
    unknown = set(params) - set(DEFAULT_GEN_PARAMS)
    if unknown:
        parser.error(f"{path}: unknown generator parameters: {', '.join(sorted(unknown))}")
    if "room_size_range" in params:
        params["room_size_range"] = tuple(params["room_size_range"])
    return params


def gen_maps_handler(parser, args):
    """Implement `gen-maps` sub-command."""
    if args.count < 1:
        parser.error("--count must be >= 1")
    params = _read_params(parser, args.params)
    try:
        suite_path = generate_suite(
            args.out,
            seed=args.seed,
            count=args.count,
            tier=args.tier,
            constraints=args.constraints,
            params=params,
        )
    except InfeasibleParamsError as e:
        raise CliSilentRuntimeError(str(e), min_verbosity=3, exit_code=2) from e
    if args.verbose >= 1:
        write(f"Wrote {args.count} maps and {suite_path}")
    return 0
