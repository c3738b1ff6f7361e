"""Brute-force grid references for the allocation and bidding solvers.

Deliberately written without calling the analytic solvers so the two
routes can be checked against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .allocation import Allocation, Budget, UserProfile
from .bidding import BeliefParams

MAX_ORACLE_USERS = 8


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    steps: int = 20000

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("grid needs lo < hi")
        if self.steps < 2:
            raise ValueError("grid needs at least two steps")

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)


@dataclass(frozen=True)
class OracleAllocation:
    allocation: Allocation
    eta: float
    objective: float
    budget_error: float


def _powers_on_grid(etas, q, cap, c):
    # rows: eta grid, cols: users
    return np.clip(c[None, :] / etas[:, None] - 1.0 / q[None, :], 0.0, cap[None, :])


def grid_allocation_oracle(users: Sequence[UserProfile], bids, budget: Budget = Budget(),
                           grid: GridSpec | None = None) -> OracleAllocation:
    """Scan the cell condition on a grid and keep the allocation whose total
    power lands closest to the budget, then rescan the neighbouring cells at
    the same number of points."""
    if len(users) > MAX_ORACLE_USERS:
        raise ValueError(f"oracle is limited to {MAX_ORACLE_USERS} users")
    q = np.array([u.q for u in users], dtype=float)
    b = np.array([u.b for u in users], dtype=float)
    cap = (np.power(2.0, b) - 1.0) / q
    c = np.asarray(bids, dtype=float)
    if grid is None:
        top = float(np.max(c * q))
        grid = GridSpec(1e-9 * top, top)

    etas = grid.points()
    p = _powers_on_grid(etas, q, cap, c)
    k = int(np.argmin(np.abs(p.sum(axis=1) - budget.phi)))

    lo = etas[max(k - 1, 0)]
    hi = etas[min(k + 1, etas.size - 1)]
    fine = np.linspace(lo, hi, grid.steps)
    p = _powers_on_grid(fine, q, cap, c)
    gap = np.abs(p.sum(axis=1) - budget.phi)
    # on a plateau prefer the largest eta, matching the analytic solver
    k = int(np.flatnonzero(gap == gap.min())[-1])

    powers = p[k]
    t = np.log2(1.0 + q * powers)
    alloc = Allocation(
        powers=powers,
        eta_star=float(fine[k]),
        gammas=np.zeros_like(powers),
        throughputs=t,
        overloaded=bool(cap.sum() >= budget.phi),
    )
    return OracleAllocation(alloc, float(fine[k]), float(np.dot(c, t)), float(gap[k]))


def grid_bid_oracle(user: UserProfile, bp: BeliefParams, grid: GridSpec | None = None) -> float:
    """Price on the grid maximizing the believed utility, refined once at
    ten times the resolution around the incumbent."""
    d = 1.0 + 1.0 / bp.q_self + bp.B
    if grid is None:
        grid = GridSpec(1e-9, user.v, 20001)

    def utility(cs):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = bp.q_self * cs * d / (cs + bp.C)
            t = np.clip(np.log2(np.where(ratio > 0, ratio, 1.0)), 0.0, user.b)
        return (user.v - cs) * t

    cs = grid.points()
    u = utility(cs)
    k = int(np.argmax(u))
    h = (grid.hi - grid.lo) / (grid.steps - 1)
    fine = np.linspace(max(grid.lo, cs[k] - h), min(grid.hi, cs[k] + h), 21)
    fu = utility(fine)
    best = float(fine[int(np.argmax(fu))])
    if not math.isfinite(best):
        raise ArithmeticError("oracle produced a non-finite price")
    return best
