"""Command-line entry point: ``svrpg-lab run | plot | diag``.

Exit status is 0 on success, 1 on invalid input, 2 on a runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError
from .harness.config import OUTPUT_ENV_VAR, load_config, parse_overrides
from .harness.diag import diag_report
from .harness.experiment import initial_params, run_experiment
from .harness.plot import emit_plot
from .rng import Streams


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="svrpg-lab", description="Variance-reduced policy gradient experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="train every seed and write CSVs plus a manifest",
                         epilog=f"Any config key can be overridden with --key value. "
                                f"${OUTPUT_ENV_VAR} sets the default output root.")
    run.add_argument("config")

    plot = sub.add_parser("plot", help="draw aggregate CSVs into one SVG")
    plot.add_argument("csv", nargs="+")
    plot.add_argument("--out", required=True)
    plot.add_argument("--title", default="")

    diag = sub.add_parser("diag", help="print bound constants next to sampled values")
    diag.add_argument("config")
    return parser


def _run(args, overrides) -> int:
    config = load_config(args.config, overrides)
    out = run_experiment(config)
    print(out)
    return 0


def _diag(args, overrides) -> int:
    config = load_config(args.config, overrides)
    env = config.build_env()
    policy = config.build_policy(env)
    seed = config.seeds[0]
    report = diag_report(env, policy, initial_params(policy, seed), config.diag_samples,
                         Streams(seed), config.diag_perturb)
    print(f"env {config.env}, policy {config.policy}, seed {seed}")
    print("\n".join(report.lines()))
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser()
        args, extra = parser.parse_known_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "plot":
            if extra:
                raise ConfigError(f"unexpected arguments: {' '.join(extra)}")
            print(emit_plot(args.csv, args.out, args.title))
            return 0
        overrides = parse_overrides(extra)
        return _run(args, overrides) if args.command == "run" else _diag(args, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
