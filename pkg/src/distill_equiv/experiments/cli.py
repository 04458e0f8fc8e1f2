"""``distill-equiv`` command line.

Exit status: 0 when every invariant holds, 1 when one fails (the report names
it) or a run aborts, 2 on a configuration error.
"""

import argparse
import logging
import sys

from ..errors import ConfigError, DimensionMismatchError, InvalidInputError
from .config import COMMANDS, load_config
from .runner import run_experiment

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def build_parser():
    p = argparse.ArgumentParser(prog="distill-equiv", description="Distillation gradient experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH", help="YAML file keyed by the flag names below")
    p.add_argument("--k", metavar="N", help="class count")
    p.add_argument("--seed", metavar="N")
    p.add_argument("--t-grid", metavar="a,b,c", help="ascending temperatures")
    p.add_argument("--runs", metavar="N")
    p.add_argument("--steps", metavar="N")
    p.add_argument("--lr", metavar="X")
    p.add_argument("--layers", metavar="d0,d1,...")
    p.add_argument("--tol", metavar="X")
    p.add_argument("--reg-sign", metavar="{+1,-1}")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("-v", "--verbose", action="store_true", help="log config provenance")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    flags = {
        "k": args.k,
        "seed": args.seed,
        "t-grid": args.t_grid,
        "runs": args.runs,
        "steps": args.steps,
        "lr": args.lr,
        "layers": args.layers,
        "tol": args.tol,
        "reg-sign": args.reg_sign,
        "out": args.out,
        "format": args.format,
    }
    try:
        cfg = load_config(args.command, args.config, flags)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name, source in sorted(cfg.provenance.items()):
        logging.info("%s = %r (%s)", name, getattr(cfg, name), source)
    try:
        outcome = run_experiment(cfg)
    except (ConfigError, InvalidInputError, DimensionMismatchError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, OSError) as exc:
        print(f"{args.command} aborted: {exc}", file=sys.stderr)
        return EXIT_FAILED
    print(outcome.summary())
    for failure in outcome.failures[:20]:
        print(f"  violated: {failure}", file=sys.stderr)
    return outcome.status


if __name__ == "__main__":
    sys.exit(main())
