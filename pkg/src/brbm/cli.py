"""Command line entry point.

    brbm <experiment> --config <file> [--seed N] [--out PATH] [--workers N]
    brbm --list

Exit codes: 0 success, 2 invalid configuration, 3 resource guard tripped
(partial results written and flagged), 4 numerical failure.
"""

import argparse
import json
import sys

from .errors import ConfigError, NumericalError, ResourceGuardError
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment, write_results


def build_parser():
    parser = argparse.ArgumentParser(
        prog="brbm",
        description="Branching (reflected) Brownian motion frontier experiments",
    )
    parser.add_argument("--list", action="store_true", help="list experiments and exit")
    parser.add_argument("experiment", nargs="?", choices=EXPERIMENTS, metavar="experiment")
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="override the output CSV path")
    parser.add_argument("--workers", type=int, help="override worker count")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.list:
        for name in EXPERIMENTS:
            print(name)
        return 0
    if args.experiment is None:
        parser.print_usage(sys.stderr)
        print("brbm: error: experiment required (or --list)", file=sys.stderr)
        return 2

    data = {"experiment": args.experiment}
    if args.config:
        try:
            with open(args.config) as fh:
                data.update(json.load(fh))
        except OSError as exc:
            print(f"brbm: cannot read config: {exc}", file=sys.stderr)
            return 2
        except json.JSONDecodeError as exc:
            print(f"brbm: config is not valid JSON: {exc}", file=sys.stderr)
            return 2
        if data["experiment"] != args.experiment:
            print(
                f"brbm: config experiment {data['experiment']!r} does not match "
                f"{args.experiment!r}",
                file=sys.stderr,
            )
            return 2
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["output_path"] = args.out
    if args.workers is not None:
        data["workers"] = args.workers

    try:
        config = ExperimentConfig.from_dict(data)
    except ConfigError as exc:
        print(f"brbm: invalid config: {exc}", file=sys.stderr)
        return 2

    try:
        rows, partial = run_experiment(config)
    except NumericalError as exc:
        print(f"brbm: numerical failure: {exc}", file=sys.stderr)
        return 4
    except ResourceGuardError as exc:  # raised outside cell loops
        print(f"brbm: resource guard: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:  # parameter domain violations surfacing late
        print(f"brbm: invalid parameter: {exc}", file=sys.stderr)
        return 2

    write_results(config, rows, partial)
    if partial:
        print(
            f"brbm: resource guard tripped; partial results written to {config.output_path}",
            file=sys.stderr,
        )
        return 3
    print(f"wrote {len(rows)} rows to {config.output_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
