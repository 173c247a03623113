"""Optimal bidding under gender-parity constraints in repeated second-price auctions."""

from fairbid.distributions import BidDistribution, MarketModel, WinCurve
from fairbid.errors import (
    ConfigError,
    ConstraintViolation,
    FairbidError,
    InsufficientDataError,
    InvalidInputError,
    NonConvergenceError,
    StateError,
)
from fairbid.parity import ParityValueTable, SolverConfig, optimal_parity_bid, solve_parity
from fairbid.ratio import RatioValueTable, optimal_ratio_bid, solve_ratio
from fairbid.strategies import BiddingPolicy, Constraint, ConstraintLedger

__version__ = "0.1.0"

__all__ = [
    "BidDistribution",
    "BiddingPolicy",
    "ConfigError",
    "Constraint",
    "ConstraintLedger",
    "ConstraintViolation",
    "FairbidError",
    "InsufficientDataError",
    "InvalidInputError",
    "MarketModel",
    "NonConvergenceError",
    "ParityValueTable",
    "RatioValueTable",
    "SolverConfig",
    "StateError",
    "WinCurve",
    "optimal_parity_bid",
    "optimal_ratio_bid",
    "solve_parity",
    "solve_ratio",
]
