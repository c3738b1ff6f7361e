"""End-user bidding against a belief about the cell condition.

A user models the BS dual ``eta`` as a function of its own bid.  Under the
simple belief ``eta(c) = (c + C) / (1 + 1/q + B)`` the believed throughput
is ``log2(q c / eta(c))`` clamped to ``[0, b]`` and the user maximizes
``(v - c) * throughput`` over the feasible price interval.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .allocation import UserProfile

__all__ = [
    "BeliefParams",
    "BidKind",
    "BidResult",
    "DomainError",
    "FocMode",
    "Violation",
    "believed_power",
    "believed_throughput",
    "believed_utility",
    "check_belief_consistency",
    "feasible_interval",
    "foc_residual",
    "price_ceiling",
    "simple_belief",
    "solve_bid",
]

ROOT_TOL = 1e-10
# Bid placed when the belief carries no information about others (C = 0).
DEGENERATE_BID_FRACTION = 1e-6
_LN2 = math.log(2.0)


class DomainError(ValueError):
    """Price outside the interval where the first-order condition is defined."""


class FocMode(str, enum.Enum):
    """Which first-order condition drives the bid.

    ``PAPER_FOC`` omits the 1/ln 2 factor on the marginal-throughput term
    and reproduces the published bid vectors; ``EXACT_LOG2`` is the true
    derivative of the believed utility.
    """

    PAPER_FOC = "paper_foc"
    EXACT_LOG2 = "exact_log2"


class BidKind(str, enum.Enum):
    INTERIOR_FOC = "interior_foc"
    BOUNDARY_CBAR = "boundary_cbar"
    BOUNDARY_VALUATION = "boundary_valuation"
    ABSTAIN = "abstain"


@dataclass(frozen=True)
class BeliefParams:
    """Announced aggregates over the believed active set of other users.

    ``C`` sums believed prices, ``B`` sums believed inverse qualities.
    """

    C: float
    B: float
    q_self: float

    def __post_init__(self):
        if not (self.C >= 0 and self.B >= 0 and self.q_self > 0):
            raise ValueError(f"invalid belief parameters {self!r}")

    @property
    def denom(self) -> float:
        return 1.0 + 1.0 / self.q_self + self.B

    @property
    def slope(self) -> float:
        """Constant derivative of the simple belief in the own bid."""
        return 1.0 / self.denom


@dataclass(frozen=True)
class BidResult:
    c_star: float
    kind: BidKind
    believed_throughput: float
    believed_utility: float
    degenerate: bool = False


def simple_belief(c: float, bp: BeliefParams) -> float:
    return (c + bp.C) / bp.denom


def _ratio(c: float, bp: BeliefParams) -> float:
    # q c / eta(c); multiply through to avoid dividing by a zero belief.
    num = bp.q_self * c * bp.denom
    den = c + bp.C
    return num / den if den > 0 else 0.0


def believed_throughput(c: float, bp: BeliefParams, b: float) -> float:
    """Throughput the user expects at price ``c``, in ``[0, b]``."""
    if c <= 0:
        return 0.0
    r = _ratio(c, bp)
    if r <= 1.0:
        return 0.0
    return min(math.log2(r), b)


def believed_utility(c: float, v: float, bp: BeliefParams, b: float) -> float:
    return (v - c) * believed_throughput(c, bp, b)


def _price_at_ratio(target: float, bp: BeliefParams) -> float:
    # Solve q c D / (c + C) = target for c.
    k = bp.q_self * bp.denom - target
    if k <= 0:
        return math.inf
    return target * bp.C / k


def price_ceiling(bp: BeliefParams, b: float) -> float:
    """Cheapest price believed to meet the demand ``b`` in full."""
    return _price_at_ratio(2.0 ** b, bp)


def feasible_interval(bp: BeliefParams, v: float, b: float) -> tuple[float, float]:
    """``(c_zero, c_upper)``: below ``c_zero`` nothing is expected, and no
    rational bid exceeds ``c_upper = min(c_bar, v)``.  Either may be inf."""
    c_zero = _price_at_ratio(1.0, bp)
    return c_zero, min(price_ceiling(bp, b), v)


def foc_residual(c: float, bp: BeliefParams, v: float, mode: FocMode = FocMode.PAPER_FOC,
                 b: float | None = None) -> float:
    """Marginal believed utility at ``c`` (strictly decreasing in ``c``).

    Defined for ``c_zero < c <= c_upper``; ``b`` tightens the upper end to
    the price ceiling when given.
    """
    c_zero = _price_at_ratio(1.0, bp)
    upper = v if b is None else min(v, price_ceiling(bp, b))
    if not (c > c_zero and c <= upper * (1 + 1e-12)):
        raise DomainError(f"price {c!r} outside ({c_zero!r}, {upper!r}]")
    marginal = (v - c) * (1.0 / c - bp.slope / simple_belief(c, bp))
    if FocMode(mode) is FocMode.EXACT_LOG2:
        marginal /= _LN2
    return -math.log2(_ratio(c, bp)) + marginal


def solve_bid(user: UserProfile, bp: BeliefParams, mode: FocMode = FocMode.PAPER_FOC) -> BidResult:
    v, b = user.v, user.b
    if bp.C == 0:
        return _degenerate_bid(user, bp)

    c_zero, c_upper = feasible_interval(bp, v, b)
    if c_upper <= c_zero:
        return BidResult(0.0, BidKind.ABSTAIN, 0.0, 0.0)

    c_bar = price_ceiling(bp, b)
    hi = c_upper
    if foc_residual(hi, bp, v, mode) >= 0:
        kind = BidKind.BOUNDARY_CBAR if c_bar <= v else BidKind.BOUNDARY_VALUATION
        c_star = hi
    else:
        lo = min(c_zero * (1 + 1e-9), hi)
        # Residual is positive just above c_zero unless v sits right there.
        if foc_residual(lo, bp, v, mode) <= 0:
            hi = lo
        while hi - lo > ROOT_TOL:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if foc_residual(mid, bp, v, mode) > 0:
                lo = mid
            else:
                hi = mid
        c_star = 0.5 * (lo + hi)
        kind = BidKind.INTERIOR_FOC

    t = believed_throughput(c_star, bp, b)
    return BidResult(c_star, kind, t, (v - c_star) * t)


def _degenerate_bid(user: UserProfile, bp: BeliefParams) -> BidResult:
    # With C = 0 the believed throughput is flat in c; any positive price buys it.
    t = believed_throughput(1.0, bp, user.b)
    if t <= 0:
        return BidResult(0.0, BidKind.ABSTAIN, 0.0, 0.0, degenerate=True)
    c = DEGENERATE_BID_FRACTION * user.v
    return BidResult(c, BidKind.INTERIOR_FOC, t, (user.v - c) * t, degenerate=True)


def believed_power(c: float, eta: float, q: float, b: float) -> float:
    """Power the user expects at price ``c`` when the cell condition is ``eta``."""
    cap = (2.0 ** b - 1.0) / q
    if eta <= 0:
        return cap if c > 0 else 0.0
    return min(max(c / eta - 1.0 / q, 0.0), cap)


@dataclass(frozen=True)
class Violation:
    index: int
    c_lo: float
    c_hi: float
    reason: str


def check_belief_consistency(belief: Callable[[float], float], prices: Sequence[float],
                             q_self: float, b: float) -> list[Violation]:
    """Scan adjacent grid pairs for breaches of belief consistency.

    A consistent belief never decreases in the own bid, and strictly
    increases while the believed allocation is positive but short of the
    demand.  Returns an empty list when the belief is consistent on the grid.
    """
    prices = [float(c) for c in prices]
    if len(prices) < 2 or any(b2 <= b1 for b1, b2 in zip(prices, prices[1:])):
        raise ValueError("need at least two strictly increasing prices")
    etas = [float(belief(c)) for c in prices]

    def interior(c, eta):
        if eta <= 0:
            return False
        arg = q_self * c / eta
        return arg > 1.0 and math.log2(arg) < b

    out = []
    for k in range(len(prices) - 1):
        c1, c2, e1, e2 = prices[k], prices[k + 1], etas[k], etas[k + 1]
        if e2 < e1:
            out.append(Violation(k, c1, c2, "decreasing"))
        elif e2 == e1 and interior(c1, e1) and interior(c2, e2):
            out.append(Violation(k, c1, c2, "not strictly increasing in interior regime"))
    return out
