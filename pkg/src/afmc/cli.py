"""Command line entry point ``afmc``."""
from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigurationError, DomainError, NumericFailure
from .expr import ExprSyntaxError
from .presets import preset, preset_names
from .runner import EXIT_CONFIG, EXIT_NUMERIC, run_experiment


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afmc", description="Additive functionals of Markov chains: experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file (INI or JSON)")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=_u64)
    run.add_argument("--workers", type=_positive)

    pre = sub.add_parser("preset", help="run a pinned preset")
    pre.add_argument("name")
    pre.add_argument("--out", required=True)
    pre.add_argument("--seed", type=_u64)
    pre.add_argument("--workers", type=_positive)

    sub.add_parser("list-presets", help="print preset names")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-presets":
        for name in preset_names():
            print(name)
        return 0
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.run.seed = args.seed
            if args.workers is not None:
                cfg.run.workers = args.workers
            cfg.validate()
        else:
            cfg = preset(args.name, seed=args.seed, workers=args.workers)
        result = run_experiment(cfg, args.out)
    except (ConfigurationError, DomainError, ExprSyntaxError, OSError) as exc:
        print(f"afmc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, FloatingPointError, ZeroDivisionError) as exc:
        print(f"afmc: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{cfg.name}: {result.results['status']} -> {args.out}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
