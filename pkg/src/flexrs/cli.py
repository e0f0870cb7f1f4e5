"""Command-line front end: run, sweep, trace, validate."""
from __future__ import annotations

import argparse
import sys

from .config import SystemConfig, load_config, reference_config
from .errors import ConfigError
from .harness import (SCHEMES, convergence_trace, format_summary_rows,
                      format_trace_rows, format_trial_rows, run_trial, sweep,
                      validate_suite)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_BAD_CONFIG = 2


def _write(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _load(path: str | None) -> SystemConfig:
    if path is None:
        return reference_config()
    return load_config(path)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="flexrs",
        description="Downlink rate-splitting simulator with beam scheduling "
                    "and device power allocation.")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single trial, one CSV row")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--scheme", default="frs-abs",
                       choices=sorted(SCHEMES))
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--timing", action="store_true",
                       help="record real wall time (breaks byte determinism)")

    p_sweep = sub.add_parser("sweep", help="Monte-Carlo sweep over an axis")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--axis", required=True, choices=("r_th", "n_users"))
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated axis values")
    p_sweep.add_argument("--trials", type=int, default=100)
    p_sweep.add_argument("--out", default=None,
                         help="per-trial CSV destination")
    p_sweep.add_argument("--summary-out", default=None,
                         help="aggregate CSV destination (default stdout)")
    p_sweep.add_argument("--timing", action="store_true")

    p_trace = sub.add_parser("trace", help="search and solver traces, one trial")
    p_trace.add_argument("--config", required=True)
    p_trace.add_argument("--seed", type=int, default=0)
    p_trace.add_argument("--out", default=None)

    p_val = sub.add_parser("validate", help="run the invariant battery")
    p_val.add_argument("--config", default=None,
                       help="defaults to the built-in reference setup")
    p_val.add_argument("--n", type=int, default=20)
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = load_config(args.config)
            rec = run_trial(config, args.seed, args.scheme, timed=args.timing)
            _write(format_trial_rows([rec]), args.out)
            return EXIT_OK

        if args.command == "sweep":
            config = load_config(args.config)
            try:
                values = [float(v) for v in args.values.split(",") if v.strip()]
            except ValueError as exc:
                raise ConfigError(f"bad --values list: {exc}") from exc
            if not values:
                raise ConfigError("--values is empty")
            result = sweep(config, args.axis, values, n_trials=args.trials,
                           timed=args.timing)
            if args.out is not None:
                _write(format_trial_rows(result.records), args.out)
            _write(format_summary_rows(result.summary), args.summary_out)
            return EXIT_OK

        if args.command == "trace":
            config = load_config(args.config)
            bundle = convergence_trace(config, args.seed)
            _write(format_trace_rows(bundle), args.out)
            return EXIT_OK

        if args.command == "validate":
            config = _load(args.config)
            report = validate_suite(config, args.n)
            if report.warning:
                print(f"warning: {report.warning}")
            for name, ok, detail in report.checks:
                print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
            return EXIT_OK if report.passed else EXIT_VALIDATION

    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
