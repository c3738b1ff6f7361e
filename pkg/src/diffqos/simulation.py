"""One-slot rounds (announce, bid, allocate) and the welfare sweep."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .allocation import (
    Allocation,
    Budget,
    UserProfile,
    flat_rate_allocation,
    solve_allocation,
)
from .bidding import BeliefParams, BidKind, BidResult, FocMode, solve_bid

__all__ = [
    "RoundOutcome",
    "Scenario",
    "SweepResult",
    "announce_beliefs",
    "flat_rate_round",
    "mean_bid",
    "run_round",
    "settle",
    "welfare_sweep",
]

PAPER_R_GRID = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


@dataclass(frozen=True)
class Scenario:
    users: tuple[UserProfile, ...]
    budget: Budget = Budget()
    foc_mode: FocMode = FocMode.PAPER_FOC

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "foc_mode", FocMode(self.foc_mode))
        if not self.users:
            raise ValueError("scenario needs at least one user")
        ids = [u.id for u in self.users]
        if ids != list(range(len(ids))):
            raise ValueError(f"user ids must be 0..{len(ids) - 1} in order, got {ids}")

    @classmethod
    def from_arrays(cls, v, q, b, budget: Budget = Budget(), foc_mode=FocMode.PAPER_FOC):
        v, q, b = np.broadcast_arrays(np.asarray(v, float), np.asarray(q, float), np.asarray(b, float))
        users = tuple(UserProfile(i, float(v[i]), float(q[i]), float(b[i])) for i in range(v.size))
        return cls(users, budget, foc_mode)


@dataclass(frozen=True)
class RoundOutcome:
    bids: np.ndarray
    paid: np.ndarray
    allocation: Allocation
    utilities: np.ndarray
    revenue: float
    social_welfare: float
    bid_results: tuple[BidResult, ...] | None = field(default=None, repr=False)


@dataclass(frozen=True)
class SweepResult:
    R_grid: tuple[float, ...]
    mean_sw_differential: tuple[float, ...]
    mean_sw_flat: tuple[float, ...]
    reps: int
    seed: int

    @property
    def gap(self) -> tuple[float, ...]:
        return tuple(d - f for d, f in zip(self.mean_sw_differential, self.mean_sw_flat))


def announce_beliefs(scenario: Scenario) -> list[BeliefParams]:
    """BS announcement: half the others' valuations and their inverse qualities."""
    v = np.array([u.v for u in scenario.users])
    inv_q = np.array([1.0 / u.q for u in scenario.users])
    out = []
    for i, u in enumerate(scenario.users):
        others = np.arange(v.size) != i
        out.append(BeliefParams(C=0.5 * float(np.sum(v[others])), B=float(np.sum(inv_q[others])), q_self=u.q))
    return out


def settle(users, bids, paid, alloc: Allocation, bid_results=None) -> RoundOutcome:
    v = np.array([u.v for u in users])
    t = alloc.throughputs
    utilities = (v - paid) * t
    return RoundOutcome(
        bids=np.asarray(bids, float),
        paid=paid,
        allocation=alloc,
        utilities=utilities,
        revenue=float(np.sum(paid * t)),
        social_welfare=float(np.sum(utilities)),
        bid_results=bid_results,
    )


def run_round(scenario: Scenario) -> RoundOutcome:
    """Differential pricing: every user bids against its announced belief,
    then the BS allocates on the realized bids.  Abstainers bid 0."""
    beliefs = announce_beliefs(scenario)
    results = tuple(solve_bid(u, bp, scenario.foc_mode) for u, bp in zip(scenario.users, beliefs))
    bids = np.array([r.c_star for r in results])
    alloc = solve_allocation(scenario.users, bids, scenario.budget)
    return settle(scenario.users, bids, bids.copy(), alloc, results)


def flat_rate_round(scenario: Scenario, c_flat: float) -> RoundOutcome:
    """Channel-only water-filling with every user charged ``c_flat`` per bit.

    Users valuing data below ``c_flat`` still pay it, so their utility can
    be negative.
    """
    if not c_flat >= 0:
        raise ValueError(f"flat rate must be non-negative, got {c_flat!r}")
    alloc = flat_rate_allocation(scenario.users, scenario.budget)
    n = len(scenario.users)
    return settle(scenario.users, np.full(n, c_flat), np.full(n, float(c_flat)), alloc)


def mean_bid(outcome: RoundOutcome) -> float:
    """Average price chosen by the users who actually bid (0 if none did)."""
    if outcome.bid_results is None:
        chosen = outcome.bids
    else:
        chosen = [r.c_star for r in outcome.bid_results if r.kind is not BidKind.ABSTAIN]
    return float(np.mean(chosen)) if len(chosen) else 0.0


def _rep_welfare(args) -> tuple[float, float]:
    n_users, b, q, R, k, r, seed, mode, phi = args
    rng = np.random.default_rng([seed, k, r])
    v = rng.uniform(0.0, R, n_users)
    # Uniform(0, R) can return exactly 0; valuations must stay positive.
    v = np.where(v > 0, v, np.nextafter(0.0, 1.0))
    scenario = Scenario.from_arrays(v, q, b, Budget(phi), mode)
    diff = run_round(scenario)
    flat = flat_rate_round(scenario, mean_bid(diff))
    return diff.social_welfare, flat.social_welfare


def welfare_sweep(n_users: int = 10, b: float = 1.5, q: float = 2.0,
                  R_grid: Sequence[float] = PAPER_R_GRID, reps: int = 50, seed: int = 0,
                  foc_mode: FocMode = FocMode.PAPER_FOC, budget: Budget = Budget(),
                  workers: int = 1) -> SweepResult:
    """Mean social welfare of differential pricing vs. the flat-rate baseline.

    Valuations for repetition ``r`` at grid index ``k`` come from a stream
    seeded by ``(seed, k, r)``, so results do not depend on ``workers``.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if n_users < 1:
        raise ValueError("need at least one user")
    R_grid = tuple(float(R) for R in R_grid)
    if not R_grid or any(not R > 0 for R in R_grid):
        raise ValueError("R values must be positive")

    mode = FocMode(foc_mode)
    jobs = [(n_users, b, q, R, k, r, seed, mode, budget.phi)
            for k, R in enumerate(R_grid) for r in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            welfare = list(pool.map(_rep_welfare, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        welfare = [_rep_welfare(j) for j in jobs]

    mean_d, mean_f = [], []
    for k in range(len(R_grid)):
        chunk = welfare[k * reps:(k + 1) * reps]
        # accumulate in rep order for bit-stable sums
        sd = sf = 0.0
        for d, f in chunk:
            sd += d
            sf += f
        mean_d.append(sd / reps)
        mean_f.append(sf / reps)
    return SweepResult(R_grid, tuple(mean_d), tuple(mean_f), reps, seed)
