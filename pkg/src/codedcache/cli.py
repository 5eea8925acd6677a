"""Command-line entry point: ``codedcache <experiment> [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from typing import Sequence

from .errors import ConfigurationError
from .experiments import DIRECTIONS, EXPERIMENTS, SCHEMES, ExperimentConfig, load_config_file, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK = 3

HELP = {
    "hops": "all-contents hop counts per cache size M",
    "hit": "all-contents cache hit probability against l",
    "security": "encoded-bit bias, key uniqueness and last-hop uniformity",
    "update": "one-broadcast cache update and re-decoding",
    "capacity-trend": "scaling of hops and transmissions with m and n",
}


def _add_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags given here override it")
    p.add_argument("--n", type=int, help="number of nodes")
    p.add_argument("--m", type=int, help="number of contents")
    p.add_argument("--Q", type=int, help="payload length in bits")
    p.add_argument("--M", dest="M_values", type=int, action="append", help="cache slots per node (repeatable)")
    p.add_argument("--l", dest="l_values", type=int, action="append", help="reachable cached files (repeatable)")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--scheme", dest="schemes", choices=SCHEMES, action="append", help="repeatable")
    p.add_argument("--routing", choices=("reactive", "proactive"))
    p.add_argument("--direction", dest="directions", choices=(*DIRECTIONS, "random"), action="append")
    p.add_argument("--independence", dest="independence_mode", action=argparse.BooleanOptionalAction, default=None,
                   help="force linearly independent slots within each node")
    p.add_argument("--c1", type=float, help="square-let side in units of s(n)")
    p.add_argument("--delta", type=float, help="interference guard of the protocol model")
    p.add_argument("--c4", type=float, help="local group side in units of sqrt(m/(nM))")
    p.add_argument("--W", type=float, help="link rate in bits per second")
    p.add_argument("--out", dest="output_path", help="summary CSV path (trial log and metadata go beside it)")
    p.add_argument("--m-sweep", dest="m_sweep", type=int, action="append", help="capacity-trend / security m values")
    p.add_argument("--n-sweep", dest="n_sweep", type=int, action="append", help="capacity-trend n values")
    p.add_argument("--skew", type=float, help="bit-one probability of skewed contents")
    p.add_argument("--requests", type=int, help="retrievals in the security experiment")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--gnuplot", action=argparse.BooleanOptionalAction, default=None, help="also write a .gp script")
    p.add_argument("--check", action="store_true", help="exit 3 if any acceptance check fails")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codedcache", description="Coded caching simulations.")
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="experiment")
    for name in EXPERIMENTS:
        _add_flags(sub.add_parser(name, help=HELP[name], description=HELP[name]))
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = load_config_file(args.config) if args.config else {}
    if values.get("experiment", args.experiment) != args.experiment:
        raise ConfigurationError(f"config file is for {values['experiment']!r}, not {args.experiment!r}")
    values.pop("experiment", None)
    for f in fields(ExperimentConfig):
        given = getattr(args, f.name, None)
        if given is not None and f.name != "experiment":
            values[f.name] = given
    return ExperimentConfig.for_experiment(args.experiment, **values)


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        report = run_experiment(config)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not config.output_path:
        sys.stdout.write(report.to_csv())
    print("\n".join(report.summary_lines()), file=sys.stderr)
    if args.check and not report.passed:
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
