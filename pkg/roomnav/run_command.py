"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php
"""

import os
from pprint import pprint

from roomnav.base_autonomy import EmbodimentProfile
from roomnav.bench import SuiteRunner, metrics_report, write_csv, write_metrics
from roomnav.cli_common import common_parser, reasoner_parser, suite_parser, verbose_parser
from roomnav.config import ConfigError, find_config_file, load_config, validate_config
from roomnav.map_io import MapFormatError, load_episodes
from roomnav.util import CliSilentRuntimeError, format_seconds, write

#: CLI argument -> (config section, key)
CLI_OVERRIDES = {
    "seed": ("bench", "seed"),
    "parallel": ("bench", "parallel"),
    "timeout_scale": ("bench", "timeout_scale"),
    "reasoner": ("reasoner", "kind"),
    "no_keyring": ("reasoner", "no_keyring"),
    "no_netrc": ("reasoner", "no_netrc"),
}

METRICS_FILE_NAME = "metrics.json"
CSV_FILE_NAME = "episodes.csv"


def add_run_parser(subparsers):
    # --- Create the parser for the "run" command ------------------------------

    parser = subparsers.add_parser(
        "run",
        parents=[verbose_parser, common_parser, suite_parser, reasoner_parser],
        help="run an episode suite with the hierarchical navigator",
        allow_abbrev=False,
    )
    parser.set_defaults(command=suite_handler, navigator="hierarchical")
    return parser


def add_baseline_parser(subparsers):
    # --- Create the parser for the "baseline" command -------------------------

    parser = subparsers.add_parser(
        "baseline",
        parents=[verbose_parser, common_parser, suite_parser],
        help="run an episode suite with a baseline navigator",
        allow_abbrev=False,
    )
    parser.add_argument(
        "--flat",
        dest="navigator",
        action="store_const",
        const="flat",
        help="room-agnostic nearest-frontier agent (default)",
    )
    parser.set_defaults(command=suite_handler, navigator="flat")
    return parser


def get_effective_config(parser, cli_args):
    """Load `--config` (or the nearest `pyroomnav.yaml`) and apply CLI overrides."""
    config_path = cli_args.config
    if config_path is None:
        config_path = find_config_file()
    elif not os.path.isfile(config_path):
        parser.error(f"Config file not found: {config_path}")
    try:
        config = load_config(config_path)
    except ConfigError as e:
        parser.error(str(e))

    # --- Override yaml entries by command line args ---

    for name, (section, key) in CLI_OVERRIDES.items():
        cli_val = getattr(cli_args, name, None)
        if cli_val is None or cli_val is False:
            continue
        cfg_val = config[section][key]
        if cli_val != cfg_val:
            if cli_args.verbose >= 4:
                write(
                    f"Override config entry `{section}.{key}: {cfg_val}` "
                    f"with CLI arg `--{name.replace('_', '-')}={cli_val!r}`"
                )
            config[section][key] = cli_val
    config["reasoner"]["verbose"] = cli_args.verbose
    try:
        validate_config(config)
    except ConfigError as e:
        parser.error(str(e))
    return config


def _profiles(parser, cli_args, config):
    names = cli_args.profile or config["bench"]["profile"]
    res = []
    for name in names.split(","):
        try:
            res.append(EmbodimentProfile.from_config(config, name.strip()))
        except ValueError as e:
            parser.error(str(e))
    return res


def suite_handler(parser, cli_args):
    """Implement `run` and `baseline` sub-commands."""
    config = get_effective_config(parser, cli_args)
    profiles = _profiles(parser, cli_args, config)
    try:
        episodes = load_episodes(cli_args.suite)
    except FileNotFoundError:
        parser.error(f"Suite file not found: {cli_args.suite}")
    except MapFormatError as e:
        raise CliSilentRuntimeError(str(e), min_verbosity=3) from e

    out_dir = cli_args.out
    os.makedirs(out_dir, exist_ok=True)
    if cli_args.verbose >= 3:
        write(
            "Running {} episodes with the {} navigator ({})...".format(
                len(episodes), cli_args.navigator, ", ".join(p.id for p in profiles)
            )
        )

    results = []
    report = {"navigator": cli_args.navigator, "profiles": {}}
    errors = 0
    for profile in profiles:
        trace_dir = None
        if cli_args.traces:
            trace_dir = os.path.join(out_dir, "traces", profile.id)
        runner = SuiteRunner(
            config,
            {
                "navigator": cli_args.navigator,
                "profile": profile,
                "trace_dir": trace_dir,
                "progress": cli_args.progress,
                "no_color": cli_args.no_color,
                "verbose": cli_args.verbose,
            },
        )
        runner.run(episodes)
        stats = runner.get_stats()
        errors += stats["errors"]
        results.extend(runner.results)
        report["profiles"][profile.id] = metrics_report(runner.results)

        if cli_args.verbose >= 5:
            pprint(stats)
        if cli_args.verbose >= 1:
            write(
                "{}: {}, errors: {}. Elap: {}.".format(
                    profile.id,
                    runner.metrics(),
                    stats["errors"],
                    format_seconds(stats["elap_secs"]),
                )
            )

    metrics_path = os.path.join(out_dir, METRICS_FILE_NAME)
    csv_path = os.path.join(out_dir, CSV_FILE_NAME)
    write_metrics(report, metrics_path)
    write_csv(results, csv_path)
    if cli_args.verbose >= 3:
        write(f"Wrote {metrics_path} and {csv_path}")

    if cli_args.report_problems and errors:
        return 10
    return 0
