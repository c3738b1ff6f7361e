"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 parse error or bad
flags, 3 dimension mismatch between scenario and bids.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .allocation import Budget, objective, solve_allocation, throughput, verify_kkt
from .bidding import FocMode
from .csvio import (
    ParseError,
    fmt,
    parse_bids,
    parse_powers,
    parse_scenario,
    write_round,
    write_sweep,
)
from .oracle import MAX_ORACLE_USERS, grid_allocation_oracle
from .simulation import PAPER_R_GRID, settle, flat_rate_round, mean_bid, run_round, welfare_sweep

EXIT_OK, EXIT_VERIFY, EXIT_PARSE, EXIT_DIMENSION = 0, 1, 2, 3
ORACLE_REL_TOL = 1e-6


class DimensionMismatch(ValueError):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None


def _align(scenario, mapping: dict[int, float], what: str) -> np.ndarray:
    ids = [u.id for u in scenario.users]
    if len(mapping) != len(ids) or set(mapping) != set(ids):
        raise DimensionMismatch(
            f"{what}: {len(mapping)} rows for {len(ids)} users (ids must match the scenario)"
        )
    return np.array([mapping[i] for i in ids], dtype=float)


def cmd_allocate(args, out) -> int:
    scenario = parse_scenario(_read(args.scenario))
    bids = _align(scenario, parse_bids(_read(args.bids)), "bids")
    alloc = solve_allocation(scenario.users, bids, scenario.budget)
    write_round(out, settle(scenario.users, bids, bids.copy(), alloc))
    return EXIT_OK


def _flat_price(value: str) -> str | float:
    if value == "auto":
        return value
    try:
        c = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a price or 'auto', got {value!r}") from None
    if not c >= 0:
        raise argparse.ArgumentTypeError("flat price must be non-negative")
    return c


def cmd_simulate(args, out) -> int:
    scenario = parse_scenario(_read(args.scenario))
    if args.foc_mode:
        scenario = replace(scenario, foc_mode=FocMode(args.foc_mode))
    outcome = run_round(scenario)
    write_round(out, outcome)
    if args.flat is not None:
        c_flat = mean_bid(outcome) if args.flat == "auto" else args.flat
        out.write(f"\n# flat_rate c={fmt(c_flat)}\n")
        write_round(out, flat_rate_round(scenario, c_flat))
    return EXIT_OK


def _float_list(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values or any(not x > 0 for x in values):
        raise argparse.ArgumentTypeError("R values must be positive")
    return values


def _positive_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _non_negative_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return n


def _positive_float(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (x > 0 and np.isfinite(x)):
        raise argparse.ArgumentTypeError("must be positive")
    return x


def cmd_sweep(args, out) -> int:
    result = welfare_sweep(
        n_users=args.users, b=args.b, q=args.q, R_grid=args.R, reps=args.reps, seed=args.seed,
        foc_mode=FocMode(args.foc_mode), budget=Budget(args.budget), workers=args.workers,
    )
    write_sweep(out, result)
    return EXIT_OK


def cmd_verify(args, out) -> int:
    scenario = parse_scenario(_read(args.scenario))
    users = scenario.users
    if args.bids:
        bids = _align(scenario, parse_bids(_read(args.bids)), "bids")
    else:
        bids = run_round(scenario).bids
    alloc = solve_allocation(users, bids, scenario.budget)
    if args.powers:
        powers = _align(scenario, parse_powers(_read(args.powers)), "powers")
        q = np.array([u.q for u in users])
        alloc = replace(alloc, powers=powers, throughputs=throughput(powers, q))

    report = verify_kkt(alloc, users, bids, scenario.budget)
    ok = report.ok
    out.write(f"eta_star: {fmt(alloc.eta_star)}\n")
    for line in report.lines():
        out.write(line + "\n")

    if len(users) <= MAX_ORACLE_USERS and not alloc.all_bids_zero and alloc.overloaded:
        oracle = grid_allocation_oracle(users, bids, scenario.budget)
        ours = objective(alloc, bids)
        gap = abs(ours - oracle.objective) / max(abs(oracle.objective), 1e-300)
        passed = gap <= ORACLE_REL_TOL
        ok = ok and passed
        out.write(f"oracle: objective={fmt(ours)} grid={fmt(oracle.objective)} "
                  f"rel_gap={gap:.3e} {'pass' if passed else 'FAIL'}\n")
    else:
        out.write("oracle: skipped\n")
    out.write("verify: " + ("pass" if ok else "FAIL") + "\n")
    return EXIT_OK if ok else EXIT_VERIFY


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="diffqos", description=__doc__.splitlines()[0])
    parser.add_argument("-o", "--output", help="write CSV here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("allocate", help="allocate power for a scenario and fixed bids")
    p.add_argument("scenario")
    p.add_argument("bids")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("simulate", help="run one bidding + allocation round")
    p.add_argument("scenario")
    p.add_argument("--flat", type=_flat_price, default=None, metavar="C|auto",
                   help="also run the flat-rate baseline at price C (auto: mean bid)")
    p.add_argument("--foc-mode", choices=[m.value for m in FocMode], default=None,
                   help="override the scenario's foc_mode")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="social welfare sweep over valuation ranges")
    p.add_argument("--users", type=_positive_int, default=10)
    p.add_argument("--b", type=_positive_float, default=1.5)
    p.add_argument("--q", type=_positive_float, default=2.0)
    p.add_argument("--R", type=_float_list, default=list(PAPER_R_GRID))
    p.add_argument("--reps", type=_positive_int, default=50)
    p.add_argument("--seed", type=_non_negative_int, default=0)
    p.add_argument("--budget", type=_positive_float, default=1.0)
    p.add_argument("--foc-mode", choices=[m.value for m in FocMode], default=FocMode.PAPER_FOC.value)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="KKT and oracle checks for an allocation")
    p.add_argument("scenario")
    p.add_argument("bids", nargs="?", help="bids CSV (default: solve the bids)")
    p.add_argument("--powers", help="CSV id,p replacing the solved powers")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_PARSE
    try:
        if args.output:
            with open(args.output, "w", newline="") as out:
                return args.func(args, out)
        return args.func(args, sys.stdout)
    except ParseError as exc:
        print(f"diffqos: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DimensionMismatch as exc:
        print(f"diffqos: dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIMENSION


if __name__ == "__main__":
    sys.exit(main())
