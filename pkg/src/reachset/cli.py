"""``reachset`` command line entry point.

Exit codes: 0 success, 2 configuration or domain error, 3 numerical infeasibility.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .errors import DomainError, InfeasibleError, NumericalError
from .experiments import ExperimentConfig, bounds_json, run_bounds_calc, run_nn_verify, run_sensitivity

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reachset", description="Sampling-based reachable set experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--threads", type=int)

    p = sub.add_parser("sensitivity", help="bound sensitivity sweep over L and alpha")
    common(p)
    p.add_argument("--out", help="trial CSV path (default: config 'output')")

    p = sub.add_parser("nn-verify", help="closed-loop ReLU controller verification")
    common(p)
    p.add_argument("--weights", help="controller weights JSON")
    p.add_argument("--out", help="trial CSV path (default: config 'output')")

    p = sub.add_parser("bounds", help="finite-sample bound calculator")
    common(p)
    p.add_argument("--out", help="write the JSON result here as well as to stdout")
    return parser


def _print_summary(rows, stream):
    if not rows:
        return
    cols = list(rows[0])
    print("\t".join(cols), file=stream)
    for row in rows:
        print("\t".join(f"{row[c]:.6g}" if isinstance(row[c], float) else str(row[c]) for c in cols), file=stream)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config)
        overrides = {k: getattr(args, k) for k in ("seed", "trials", "threads") if getattr(args, k) is not None}
        if overrides:
            cfg = replace(cfg, **overrides)
        expected = {"sensitivity": "sensitivity", "nn-verify": "nn-verify", "bounds": "bounds-calc"}[args.command]
        if cfg.experiment != expected:
            raise DomainError(f"config is for experiment {cfg.experiment!r}, not {expected!r}")

        if args.command == "bounds":
            text = bounds_json(run_bounds_calc(cfg))
            sys.stdout.write(text)
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text)
            return 0

        out = args.out or cfg.output
        if not out:
            raise DomainError("no output path: pass --out or set 'output' in the config")
        if args.command == "sensitivity":
            result = run_sensitivity(cfg)
        else:
            result = run_nn_verify(cfg, weights=args.weights)
        result.write(out)
        _print_summary(result.summary, sys.stdout)
        for note in result.warnings:
            print(f"warning: {note}", file=sys.stderr)
        return 0
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
