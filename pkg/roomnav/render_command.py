"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php
"""

from roomnav.cli_common import verbose_parser
from roomnav.episode import EpisodeTrace, TraceFormatError
from roomnav.map_io import IncompatibleFormatVersionError, MapFormatError, load_map
from roomnav.render import render
from roomnav.util import CliSilentRuntimeError, write


def add_render_parser(subparsers):
    # --- Create the parser for the "render" command ---------------------------

    parser = subparsers.add_parser(
        "render",
        parents=[verbose_parser],
        help="draw an episode trace over its map (SVG)",
        allow_abbrev=False,
    )
    parser.add_argument("--trace", metavar="FILE", required=True, help="trace (JSON lines)")
    parser.add_argument("--map", metavar="FILE", required=True, help="map (JSON)")
    parser.add_argument("--out", metavar="IMG", required=True, help="output SVG file")
    parser.add_argument("--title", help="figure title (default: episode and goal)")

    parser.set_defaults(command=render_handler)
    return parser


def render_handler(parser, args):
    """Implement `render` sub-command."""
    try:
        grid_map = load_map(args.map)
        trace = EpisodeTrace.read(args.trace)
        render(trace, grid_map, args.out, title=args.title)
    except FileNotFoundError as e:
        parser.error(str(e))
    except (TraceFormatError, MapFormatError, IncompatibleFormatVersionError) as e:
        raise CliSilentRuntimeError(str(e), min_verbosity=3, exit_code=2) from e
    if args.verbose >= 3:
        write(f"Wrote {args.out}")
    return 0
