"""Command-line entry point: ``broyden-lab run <config> [options]``."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .harness import EXIT_CONFIG, THREADS_ENV, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="broyden-lab",
        description="Run Broyden-family quasi-Newton experiments and check their rate bounds.",
        epilog=f"Exit codes: 0 ok, 1 malformed config, 2 bound violation, 3 numerical breakdown. "
               f"{THREADS_ENV} caps the number of concurrent runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="execute the experiments described by a config file")
    p.add_argument("config", help="path to the key=value config file")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides [output] dir)")
    p.add_argument("--seed", type=int, metavar="N", help="problem seed (overrides [problem] seed)")
    p.add_argument("--diagnostics", action="store_true", help="record quadrature-based diagnostics")
    p.add_argument("--compare-greedy", action="store_true", help="add the greedy-vs-classical comparison")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which would collide with "bound violation"
        return EXIT_CONFIG if exc.code else 0
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.replace("problem", seed=args.seed)
        if args.diagnostics:
            cfg = cfg.replace("solver", diagnostics=True)
        if args.compare_greedy:
            cfg = cfg.replace("compare", greedy=True)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, out_dir=args.out)


if __name__ == "__main__":
    sys.exit(main())
