"""Scenario, bid and report CSV formats.

Scenario files carry a header ``id,v,q,b`` with optional ``# key=value``
lines for ``budget`` and ``foc_mode``.  Bid files carry ``id,c``.
"""

from __future__ import annotations

import csv
import io
from typing import Iterable, TextIO

import numpy as np

from .allocation import Budget, UserProfile
from .bidding import FocMode
from .simulation import RoundOutcome, Scenario, SweepResult

SCENARIO_HEADER = ["id", "v", "q", "b"]
BIDS_HEADER = ["id", "c"]
POWERS_HEADER = ["id", "p"]
OUTPUT_HEADER = ["id", "bid", "power", "throughput", "utility"]
SUMMARY_HEADER = ["eta_star", "revenue", "social_welfare"]
SWEEP_HEADER = ["R", "mean_sw_differential", "mean_sw_flat", "gap"]


class ParseError(ValueError):
    pass


def fmt(x: float) -> str:
    """Six significant digits; ``-0`` is folded to ``0``."""
    s = format(float(x), ".6g")
    return "0" if s == "-0" else s


def _split(text: str):
    options, rows = {}, []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            for token in body.replace(",", " ").split():
                if "=" in token:
                    key, _, value = token.partition("=")
                    options[key.strip()] = value.strip()
            continue
        rows.append(line)
    return options, list(csv.reader(rows))


def _table(rows, header, what):
    if not rows:
        raise ParseError(f"{what}: empty file")
    if [h.strip() for h in rows[0]] != header:
        raise ParseError(f"{what}: expected header {','.join(header)}, got {','.join(rows[0])}")
    body = rows[1:]
    if not body:
        raise ParseError(f"{what}: no data rows")
    out = []
    for n, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ParseError(f"{what}: row {n} has {len(row)} fields, expected {len(header)}")
        try:
            out.append((int(row[0]), *(float(x) for x in row[1:])))
        except ValueError as exc:
            raise ParseError(f"{what}: row {n}: {exc}") from None
    return out


def parse_scenario(text: str) -> Scenario:
    options, rows = _split(text)
    unknown = set(options) - {"budget", "foc_mode"}
    if unknown:
        raise ParseError(f"scenario: unknown option(s) {sorted(unknown)}")
    try:
        budget = Budget(float(options.get("budget", 1.0)))
        mode = FocMode(options.get("foc_mode", FocMode.PAPER_FOC.value))
    except ValueError as exc:
        raise ParseError(f"scenario: {exc}") from None
    records = sorted(_table(rows, SCENARIO_HEADER, "scenario"))
    try:
        users = [UserProfile(i, v, q, b) for i, v, q, b in records]
        return Scenario(users, budget, mode)
    except ValueError as exc:
        raise ParseError(f"scenario: {exc}") from None


def _parse_vector(text: str, header, what) -> dict[int, float]:
    _, rows = _split(text)
    records = _table(rows, header, what)
    out = {}
    for i, x in records:
        if i in out:
            raise ParseError(f"{what}: duplicate id {i}")
        out[i] = x
    return out


def parse_bids(text: str) -> dict[int, float]:
    bids = _parse_vector(text, BIDS_HEADER, "bids")
    if any(not (c >= 0 and np.isfinite(c)) for c in bids.values()):
        raise ParseError("bids: prices must be finite and non-negative")
    return bids


def parse_powers(text: str) -> dict[int, float]:
    return _parse_vector(text, POWERS_HEADER, "powers")


def dump_scenario(scenario: Scenario) -> str:
    buf = io.StringIO()
    buf.write(f"# budget={scenario.budget.phi!r}\n")
    buf.write(f"# foc_mode={scenario.foc_mode.value}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCENARIO_HEADER)
    for u in scenario.users:
        w.writerow([u.id, repr(u.v), repr(u.q), repr(u.b)])
    return buf.getvalue()


def dump_bids(bids: Iterable[float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BIDS_HEADER)
    for i, c in enumerate(bids):
        w.writerow([i, repr(float(c))])
    return buf.getvalue()


def write_round(out: TextIO, outcome: RoundOutcome) -> None:
    w = csv.writer(out, lineterminator="\n")
    alloc = outcome.allocation
    w.writerow(OUTPUT_HEADER)
    for i in range(len(outcome.bids)):
        w.writerow([i, fmt(outcome.paid[i]), fmt(alloc.powers[i]), fmt(alloc.throughputs[i]),
                    fmt(outcome.utilities[i])])
    out.write("\n")
    w.writerow(SUMMARY_HEADER)
    w.writerow([fmt(alloc.eta_star), fmt(outcome.revenue), fmt(outcome.social_welfare)])


def read_round(text: str) -> tuple[list[list[str]], list[str]]:
    """Split a report back into its per-user rows and the summary row."""
    blocks = [b for b in text.strip().split("\n\n") if b.strip()]
    table = list(csv.reader(blocks[0].splitlines()))
    summary = list(csv.reader(blocks[1].splitlines()))
    return table[1:], summary[1]


def write_sweep(out: TextIO, result: SweepResult) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for R, d, f, g in zip(result.R_grid, result.mean_sw_differential, result.mean_sw_flat, result.gap):
        w.writerow([fmt(R), fmt(d), fmt(f), fmt(g)])
