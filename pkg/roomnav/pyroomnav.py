"""
Object-goal navigation benchmark for a simulated grid world.

(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

Usage examples:
  > pyroomnav --help
  > pyroomnav gen-maps --seed 0 --count 30 --out suite
  > pyroomnav run --suite suite/suite.json --out results
"""

import argparse
import platform
import sys

from roomnav import __version__
from roomnav.gen_maps_command import add_gen_maps_parser
from roomnav.render_command import add_render_parser
from roomnav.run_command import add_baseline_parser, add_run_parser
from roomnav.util import (
    DEBUG_FLAGS,
    PYTHON_VERSION,
    CliSilentRuntimeError,
    check_cli_verbose,
    set_pyroomnav_logger,
)


# ===============================================================================
# run
# ===============================================================================
def run():
    """CLI main entry point."""

    # Use print() instead of logging when running in CLI mode:
    set_pyroomnav_logger(None)

    parser = argparse.ArgumentParser(
        description="Run object-goal navigation episodes in a simulated grid world.",
        allow_abbrev=False,
    )

    if check_cli_verbose(3) > 3:
        version_info = "pyroomnav/{} Python/{} {}".format(
            __version__, PYTHON_VERSION, platform.platform()
        )
        version_info += f", Python: {sys.executable}"
    else:
        version_info = f"{__version__}"

    parser.add_argument("-V", "--version", action="version", version=version_info)

    subparsers = parser.add_subparsers(help="sub-command help")

    add_run_parser(subparsers)
    add_baseline_parser(subparsers)
    add_render_parser(subparsers)
    add_gen_maps_parser(subparsers)

    # --- Parse command line ---------------------------------------------------

    args = parser.parse_args()

    if not callable(getattr(args, "command", None)):
        parser.error("missing command (choose from 'run', 'baseline', 'render', 'gen-maps')")

    args.verbose -= args.quiet
    del args.quiet

    if args.debug:
        if args.verbose < 4:
            parser.error("'--debug' requires verbose level >= 4")
        DEBUG_FLAGS.update(args.debug)

    try:
        res = args.command(parser, args)
    except CliSilentRuntimeError as e:
        # This exception suppresses stacktrace in non-verbose mode
        print(f"\nERROR:\n{e}\n", file=sys.stderr)
        if args.verbose <= e.min_verbosity:
            sys.exit(e.exit_code)
        raise
    except KeyboardInterrupt:
        print("\nAborted by user.", file=sys.stderr)
        sys.exit(3)
    if res:
        sys.exit(res)
    return


# Script entry point
if __name__ == "__main__":
    # Just in case...
    from multiprocessing import freeze_support

    freeze_support()

    run()
