"""Command line entry point.

    critwave run <config.json> [--out DIR] [--seed N] [--threads K]
    critwave report <artifacts_dir> [--out FILE]

Exit codes: 0 all assertions pass, 1 an assertion failed, 2 usage or
configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import ConfigError, NumericFailure, TruncationError, Undetermined, UndefinedVelocity

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="critwave", description="Energy-critical wave equation experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one scenario from a JSON config")
    run.add_argument("config", help="path to the scenario config (JSON)")
    run.add_argument("--out", help="output directory (default: config 'out' or ./critwave-out/<scenario>)")
    run.add_argument("--seed", type=int, help="seed for the perturbation RNG (Philox, SeedSequence-keyed)")
    run.add_argument("--threads", type=int, default=1, help="worker threads for independent sub-runs")
    rep = sub.add_parser("report", help="aggregate summary.json files into a markdown report")
    rep.add_argument("artifacts_dir")
    rep.add_argument("--out", help="markdown file to write (default: <artifacts_dir>/report.md)")
    return p


def _error(msg: str, code: int) -> int:
    print(f"critwave: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    from . import scenarios

    try:
        if args.command == "report":
            out = args.out or os.path.join(args.artifacts_dir, "report.md")
            status, text = scenarios.emit_report(args.artifacts_dir, out)
            print(text, end="")
            return status
        if args.threads is not None and args.threads < 1:
            return _error("--threads must be >= 1", EXIT_USAGE)
        cfg = scenarios.load_config(args.config)
        out = Path(args.out or cfg.get("out") or Path("critwave-out") / cfg["scenario"])
        summary = scenarios.run_scenario(cfg, out, seed=args.seed, threads=args.threads)
    except ConfigError as exc:
        return _error(str(exc), EXIT_USAGE)
    except (NumericFailure, TruncationError, Undetermined, UndefinedVelocity, FloatingPointError) as exc:
        return _error(f"numeric failure: {exc}", EXIT_NUMERIC)
    for a in summary.assertions:
        mark = "PASS" if a["pass"] else "FAIL"
        print(f"{mark} {a['name']}: {a['value']} {a['op']} {a['tolerance']}")
    print(f"{'PASS' if summary.passed else 'FAIL'} {summary.scenario} -> {out / 'summary.json'}")
    return EXIT_PASS if summary.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
