"""Command-line front end: run experiments, verify theorems, rebuild figures.

Exit codes: 0 success, 1 usage error, 2 verification failure.
"""
from __future__ import annotations

import argparse
import configparser
import sys

from .harness import (DEFAULT_MASTER_SEED, DEFAULT_TRIALS, parse_spec_file,
                      reproduce_figure, resolve_workers, rows_to_csv,
                      run_experiment, verify_theorems, write_csv)
from .schedule import min_overhead

USAGE_ERROR = 1
VERIFY_FAILURE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(USAGE_ERROR)


def _parse_grid(text: str):
    """Parse "M=2:10,N=1:8,K=1:2,U=1:2" into a list of dimension tuples."""
    spans = {}
    for part in text.split(","):
        key, _, rng = part.partition("=")
        lo, _, hi = rng.partition(":")
        spans[key.strip().upper()] = range(int(lo), int(hi or lo) + 1)
    try:
        return [(m, n, k, u)
                for m in spans["M"] for n in spans["N"]
                for k in spans["K"] for u in spans["U"]]
    except KeyError as exc:
        raise ValueError(f"grid spec missing {exc.args[0]}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bdris",
                     description="BD-RIS two-phase channel-estimation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment spec file")
    p_run.add_argument("spec_file")
    p_run.add_argument("--out", help="CSV path (default: stdout)")
    p_run.add_argument("--workers", type=int, default=None)

    p_ver = sub.add_parser("verify", help="check the design-rank guarantees")
    p_ver.add_argument("--grid", default="M=2:10,N=1:8,K=1:2,U=1:2")
    p_ver.add_argument("--seed", type=int, default=0)

    p_fig = sub.add_parser("figure", help="reproduce a study figure sweep")
    p_fig.add_argument("name", choices=[f"fig{i}" for i in range(3, 9)])
    p_fig.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p_fig.add_argument("--seed", type=int, default=DEFAULT_MASTER_SEED)
    p_fig.add_argument("--out", help="CSV path (default: stdout)")
    p_fig.add_argument("--workers", type=int, default=None)

    p_min = sub.add_parser("min-overhead",
                           help="print the minimum pilot overhead")
    p_min.add_argument("--m", type=int, required=True)
    p_min.add_argument("--n", type=int, required=True)
    p_min.add_argument("--k", type=int, default=1)
    p_min.add_argument("--u", type=int, default=1)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR

    if args.command == "run":
        try:
            spec = parse_spec_file(args.spec_file)
        except (OSError, KeyError, ValueError, configparser.Error) as exc:
            print(f"bad spec file: {exc}", file=sys.stderr)
            return USAGE_ERROR
        rows = run_experiment(spec, workers=resolve_workers(args.workers))
        _emit(rows, args.out)
        return 0

    if args.command == "verify":
        try:
            grid = _parse_grid(args.grid)
        except ValueError as exc:
            print(f"bad grid: {exc}", file=sys.stderr)
            return USAGE_ERROR
        report = verify_theorems(grid, seed=args.seed)
        print(report.summary())
        return 0 if report.passed else VERIFY_FAILURE

    if args.command == "figure":
        rows = reproduce_figure(args.name, trials=args.trials,
                                master_seed=args.seed,
                                workers=resolve_workers(args.workers))
        _emit(rows, args.out)
        return 0

    if args.command == "min-overhead":
        try:
            ov = min_overhead(args.m, args.n, args.k, args.u)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return USAGE_ERROR
        print(f"tau1={ov.tau1} tau2={ov.tau2} total={ov.total}")
        return 0
    return USAGE_ERROR


def _emit(rows, out_path) -> None:
    if out_path:
        write_csv(rows, out_path)
    else:
        sys.stdout.write(rows_to_csv(rows))


if __name__ == "__main__":
    raise SystemExit(main())
