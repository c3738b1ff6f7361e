"""Price-weighted, demand-capped water-filling at the base station.

The BS maximizes ``sum_i c_i * log2(1 + q_i P_i)`` subject to per-user
throughput caps ``log2(1 + q_i P_i) <= b_i``, ``P_i >= 0`` and the power
budget.  The optimum has the generalized water-filling form::

    P_i = clamp(c_i / eta - 1/q_i, 0, cap_i)

so a single scalar dual ``eta`` (the cell condition) pins the whole
allocation.  It is found by bisection on the aggregate clamped power.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "AllBidsZero",
    "Allocation",
    "Budget",
    "KKTReport",
    "UserProfile",
    "aggregate_power",
    "demand_cap",
    "flat_rate_allocation",
    "objective",
    "solve_allocation",
    "throughput",
    "verify_kkt",
]

# Bisection stopping rules on eta.
ETA_REL_WIDTH = 1e-12
BUDGET_TOL = 1e-10
_MAX_ITER = 400


class AllBidsZero(RuntimeWarning):
    """Every bid is zero in an overloaded cell; nothing funds the objective."""


@dataclass(frozen=True)
class UserProfile:
    """One end-user: valuation per bit, channel quality h/N, demanded bits/s."""

    id: int
    v: float
    q: float
    b: float

    def __post_init__(self):
        for name in ("v", "q", "b"):
            x = getattr(self, name)
            if not (math.isfinite(x) and x > 0):
                raise ValueError(f"user {self.id}: {name} must be positive and finite, got {x!r}")


@dataclass(frozen=True)
class Budget:
    phi: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.phi) and self.phi > 0):
            raise ValueError(f"budget phi must be positive and finite, got {self.phi!r}")


@dataclass(frozen=True)
class Allocation:
    """Primal powers together with the recovered duals.

    ``gammas`` are the duals of the throughput caps; ``eta_star`` is the
    dual of the power budget.  ``all_bids_zero`` marks the degenerate
    overloaded cell where no user bid anything.
    """

    powers: np.ndarray
    eta_star: float
    gammas: np.ndarray
    throughputs: np.ndarray
    overloaded: bool
    all_bids_zero: bool = False

    @property
    def total_power(self) -> float:
        return float(np.sum(self.powers))


def throughput(p, q):
    """Shannon throughput ``log2(1 + q p)`` with unit bandwidth."""
    return np.log2(1.0 + np.multiply(q, p))


def demand_cap(user: UserProfile) -> float:
    """Power at which ``user``'s throughput reaches its demand exactly."""
    return (2.0 ** user.b - 1.0) / user.q


def _arrays(users: Sequence[UserProfile], bids):
    q = np.array([u.q for u in users], dtype=float)
    caps = np.array([demand_cap(u) for u in users], dtype=float)
    c = np.asarray(bids, dtype=float)
    if c.shape != q.shape:
        raise ValueError(f"expected {q.size} bids, got {c.size}")
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise ValueError("bids must be finite and non-negative")
    return q, caps, c


def _clamped_powers(eta: float, q, caps, c) -> np.ndarray:
    return np.clip(c / eta - 1.0 / q, 0.0, caps)


def aggregate_power(eta: float, users: Sequence[UserProfile], bids) -> float:
    """Total clamped power ``g(eta)`` requested at cell condition ``eta``.

    Continuous and non-increasing in ``eta``; tends to 0 as ``eta`` grows.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta!r}")
    q, caps, c = _arrays(users, bids)
    if math.isinf(eta):
        return 0.0
    return float(np.sum(_clamped_powers(eta, q, caps, c)))


def _find_eta(q, caps, c, phi: float) -> float:
    """Largest eta in the final bracket with g(eta) >= phi (up to tolerance).

    Requires sum of caps over positive bidders > phi, so that g exceeds phi
    as eta -> 0 while g(max c q) = 0.
    """
    hi = float(np.max(c * q))
    lo = 0.0
    for _ in range(_MAX_ITER):
        if hi - lo <= ETA_REL_WIDTH * float(np.max(c * q)):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g = float(np.sum(_clamped_powers(mid, q, caps, c)))
        if abs(g - phi) <= BUDGET_TOL:
            lo = hi = mid
            break
        if g > phi:
            lo = mid
        else:
            hi = mid
    eta = lo if lo > 0 else hi

    # Polish: with the active set known, the budget equation is linear in 1/eta.
    p = _clamped_powers(eta, q, caps, c)
    free = (p > 0) & (p < caps)
    if np.any(free):
        capped_total = float(np.sum(caps[(p >= caps) & (c > 0)]))
        denom = phi - capped_total + float(np.sum(1.0 / q[free]))
        if denom > 0:
            exact = float(np.sum(c[free])) / denom
            p_exact = _clamped_powers(exact, q, caps, c)
            same_regime = np.array_equal(p_exact > 0, p > 0) and np.array_equal(
                p_exact >= caps, p >= caps
            )
            if same_regime:
                eta = exact
    return eta


def _gammas(eta: float, q, caps, c, powers) -> np.ndarray:
    capped = (powers >= caps) & (c > 0)
    return np.where(capped, np.maximum(0.0, c - eta * (1.0 / q + caps)), 0.0)


def solve_allocation(users: Sequence[UserProfile], bids, budget: Budget = Budget()) -> Allocation:
    """Revenue-maximizing power split for the given bids.

    Underloaded cells (all demand caps fit within the budget) receive their
    caps with ``eta_star = 0``.  If every bid is zero in an overloaded cell
    the powers are all zero and an :class:`AllBidsZero` warning is issued.
    When the positive bidders' caps fit but the cell is still overloaded,
    those bidders are saturated and the indifferent zero bidders share the
    remainder by plain water-filling.
    """
    if len(users) == 0:
        raise ValueError("need at least one user")
    q, caps, c = _arrays(users, bids)
    phi = budget.phi

    if float(np.sum(caps)) <= phi:
        powers = caps.copy()
        return Allocation(
            powers=powers,
            eta_star=0.0,
            gammas=np.where(c > 0, c, 0.0),
            throughputs=throughput(powers, q),
            overloaded=False,
        )

    paying = c > 0
    if not np.any(paying):
        warnings.warn("all bids are zero in an overloaded cell", AllBidsZero, stacklevel=2)
        zeros = np.zeros_like(q)
        return Allocation(zeros, 0.0, zeros.copy(), zeros.copy(), True, all_bids_zero=True)

    funded = float(np.sum(caps[paying]))
    if funded <= phi:
        powers = np.where(paying, caps, 0.0)
        rest = ~paying
        powers[rest] = _water_fill(q[rest], caps[rest], np.ones(int(rest.sum())), phi - funded)
        return Allocation(
            powers=powers,
            eta_star=0.0,
            gammas=np.where(paying, c, 0.0),
            throughputs=throughput(powers, q),
            overloaded=True,
        )

    eta = _find_eta(q, caps, c, phi)
    powers = _clamped_powers(eta, q, caps, c)
    return Allocation(
        powers=powers,
        eta_star=eta,
        gammas=_gammas(eta, q, caps, c, powers),
        throughputs=throughput(powers, q),
        overloaded=True,
    )


def _water_fill(q, caps, c, phi: float) -> np.ndarray:
    if phi <= 0 or q.size == 0:
        return np.zeros_like(q)
    eta = _find_eta(q, caps, c, phi)
    return _clamped_powers(eta, q, caps, c)


def flat_rate_allocation(users: Sequence[UserProfile], budget: Budget = Budget()) -> Allocation:
    """Conventional sum-throughput water-filling, demand caps still enforced."""
    return solve_allocation(users, np.ones(len(users)), budget)


def objective(alloc: Allocation, bids) -> float:
    """BS revenue ``sum_i c_i T_i`` of an allocation."""
    return float(np.dot(np.asarray(bids, dtype=float), alloc.throughputs))


@dataclass
class KKTReport:
    """Residuals of the four KKT condition groups.  ``ok`` iff all pass."""

    stationarity: float
    primal: float
    dual: float
    slackness: float
    tol: float = 1e-7
    passed: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def lines(self):
        for name in ("stationarity", "primal", "dual", "slackness"):
            status = "pass" if self.passed[name] else "FAIL"
            yield f"{name}: residual={getattr(self, name):.3e} {status}"


def verify_kkt(alloc: Allocation, users: Sequence[UserProfile], bids, budget: Budget = Budget(),
               tol: float = 1e-7) -> KKTReport:
    """Check an allocation against the KKT conditions of the BS problem.

    The slack dual of ``P_i >= 0`` is not stored; it is implied by
    stationarity as ``eta - (c_i - gamma_i) / (1/q_i + P_i)``.  Residuals
    are scaled so that each is compared against ``tol``.
    """
    q, caps, c = _arrays(users, bids)
    p = np.asarray(alloc.powers, dtype=float)
    gam = np.asarray(alloc.gammas, dtype=float)
    eta = float(alloc.eta_star)
    b = np.array([u.b for u in users], dtype=float)
    t = throughput(p, q)
    scale = max(eta, 1.0)

    # (a) every powered user sits at the common level eta; capped users reach
    # it through gamma.
    level = (c - gam) / (1.0 / q + p)
    stationarity = float(np.max(np.abs(level[p > 0] - eta), initial=0.0))
    stat_ok = stationarity <= tol * (eta if eta > 0 else 1.0)

    # (b) primal feasibility
    budget_gap = float(np.sum(p)) - budget.phi
    primal = max(
        abs(budget_gap) if alloc.overloaded and not alloc.all_bids_zero else max(budget_gap, 0.0),
        float(np.max(t - b, initial=0.0)),
        float(np.max(-p, initial=0.0)),
    )
    primal_ok = primal <= 1e-9

    # (c) dual feasibility, including the implied slack multipliers
    lam = eta - level
    dual = max(0.0, -eta, float(np.max(-gam, initial=0.0)), float(np.max(-lam, initial=0.0)))
    dual_ok = dual <= tol * scale

    # (d) complementary slackness
    slack = max(
        float(np.max(np.abs(gam * (b - t)), initial=0.0)),
        float(np.max(np.abs(lam * p), initial=0.0)),
    )
    slack_ok = slack <= tol * scale

    return KKTReport(
        stationarity=stationarity,
        primal=primal,
        dual=dual,
        slackness=slack,
        tol=tol,
        passed={
            "stationarity": bool(stat_ok),
            "primal": bool(primal_ok),
            "dual": bool(dual_ok),
            "slackness": bool(slack_ok),
        },
    )
