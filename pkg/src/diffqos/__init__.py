"""Differential pricing and power allocation for a downlink FDMA cell.

The base station splits its power budget by price-weighted, demand-capped
water-filling; users pick bids against an announced belief about the cell
condition.
"""

from .allocation import (
    AllBidsZero,
    Allocation,
    Budget,
    KKTReport,
    UserProfile,
    aggregate_power,
    demand_cap,
    flat_rate_allocation,
    objective,
    solve_allocation,
    throughput,
    verify_kkt,
)
from .bidding import (
    BeliefParams,
    BidKind,
    BidResult,
    DomainError,
    FocMode,
    believed_power,
    believed_throughput,
    believed_utility,
    check_belief_consistency,
    feasible_interval,
    foc_residual,
    price_ceiling,
    simple_belief,
    solve_bid,
)
from .oracle import GridSpec, grid_allocation_oracle, grid_bid_oracle
from .simulation import (
    RoundOutcome,
    Scenario,
    SweepResult,
    announce_beliefs,
    flat_rate_round,
    mean_bid,
    run_round,
    welfare_sweep,
)

__version__ = "0.1.0"
