"""Bidding policies and the running constraint ledger."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fairbid.distributions import FEMALE, MALE, group_index
from fairbid.errors import ConfigError, ConstraintViolation, PolicyError
from fairbid.parity import ParityValueTable
from fairbid.ratio import (
    RatioValueTable,
    _interpolate,
    check_params,
    female_win_blocked,
    is_feasible,
    male_win_blocked,
)

NONE, PARITY, RATIO = "none", "parity", "ratio"
TRUTHFUL, NAIVE, OPTIMAL = "truthful", "naive", "optimal"


@dataclass(frozen=True)
class Constraint:
    """Which fairness rule a ledger enforces.

    ``K`` is the parity bound or the ratio slack; ``r`` and ``p`` are only
    meaningful for the ratio kind.
    """

    kind: str = NONE
    K: float = 0
    r: float = 1.0
    p: float | None = None

    def __post_init__(self):
        if self.kind == PARITY:
            if int(self.K) != self.K or self.K < 1:
                raise ConfigError("parity K must be an integer >= 1")
        elif self.kind == RATIO:
            if self.p is None:
                raise ConfigError("ratio constraint needs p")
            check_params(self.r, self.K, self.p)
        elif self.kind != NONE:
            raise ConfigError(f"unknown constraint kind {self.kind!r}")

    @classmethod
    def none(cls):
        return cls(NONE)

    @classmethod
    def parity(cls, K):
        return cls(PARITY, K=int(K))

    @classmethod
    def ratio(cls, r, K, p):
        return cls(RATIO, K=K, r=float(r), p=float(p))

    def allowed(self, n_m, n_w, g):
        """Vectorised: may a win of type ``g`` be taken at counts ``(n_m, n_w)``?"""
        n_m, n_w, g = np.asarray(n_m), np.asarray(n_w), np.asarray(g)
        if self.kind == NONE:
            return np.ones(np.broadcast(n_m, n_w, g).shape, dtype=bool)
        if self.kind == PARITY:
            step = np.where(g == MALE, 1, -1)
            return np.abs(n_m - n_w + step) <= self.K
        return ~np.where(
            g == MALE,
            male_win_blocked(self.r, self.K, self.p, n_m, n_w),
            female_win_blocked(self.r, self.K, self.p, n_m, n_w),
        )

    def satisfied(self, n_m, n_w):
        n_m, n_w = np.asarray(n_m), np.asarray(n_w)
        if self.kind == NONE:
            return np.ones(np.broadcast(n_m, n_w).shape, dtype=bool)
        if self.kind == PARITY:
            return np.abs(n_m - n_w) <= self.K
        return is_feasible(self.r, self.K, self.p, n_m, n_w)

    def matches(self, table) -> bool:
        if isinstance(table, ParityValueTable):
            return self.kind == PARITY and table.K == self.K
        if isinstance(table, RatioValueTable):
            return (
                self.kind == RATIO
                and abs(table.r - self.r) < 1e-12
                and abs(table.K - self.K) < 1e-12
                and abs(table.p - self.p) < 1e-12
            )
        return False


@dataclass
class ConstraintLedger:
    """Running win counts, the authority on whether a slot may be won."""

    constraint: Constraint
    n_m: int = 0
    n_w: int = 0

    @property
    def kind(self) -> str:
        return self.constraint.kind

    @property
    def k(self) -> int:
        return self.n_m - self.n_w

    def allowed_to_win(self, theta) -> bool:
        return bool(self.constraint.allowed(self.n_m, self.n_w, group_index(theta)))

    def record_outcome(self, theta, won: bool) -> "ConstraintLedger":
        if not won:
            return self
        if group_index(theta) == MALE:
            self.n_m += 1
        else:
            self.n_w += 1
        if not self.constraint.satisfied(self.n_m, self.n_w):
            raise ConstraintViolation(
                f"{self.kind} constraint broken at n_m={self.n_m}, n_w={self.n_w}"
            )
        return self


@dataclass(frozen=True, eq=False)
class BiddingPolicy:
    """Truthful, screen-then-truthful (naive) or table-driven optimal bidding."""

    variant: str
    v_m: float
    v_w: float
    table: ParityValueTable | RatioValueTable | None = None

    def __post_init__(self):
        if self.variant not in (TRUTHFUL, NAIVE, OPTIMAL):
            raise ConfigError(f"unknown policy variant {self.variant!r}")
        if self.variant == OPTIMAL and self.table is None:
            raise ConfigError("the optimal policy needs a solved table")

    @classmethod
    def truthful(cls, v_m, v_w):
        return cls(TRUTHFUL, v_m, v_w)

    @classmethod
    def naive(cls, v_m, v_w):
        return cls(NAIVE, v_m, v_w)

    @classmethod
    def optimal(cls, table, v_m, v_w):
        return cls(OPTIMAL, v_m, v_w, table)

    @property
    def values(self) -> np.ndarray:
        return np.array([self.v_m, self.v_w])

    @property
    def name(self) -> str:
        if self.variant != OPTIMAL:
            return self.variant
        return "optimal_parity" if isinstance(self.table, ParityValueTable) else "optimal_ratio"

    def check(self, constraint: Constraint):
        if self.variant == OPTIMAL and not constraint.matches(self.table):
            raise PolicyError(f"{self.name} table does not match the {constraint.kind} ledger")

    def bid_array(self, constraint: Constraint, n_m, n_w, g, values=None):
        """Bids for arrays of ledger states.

        ``values`` optionally replaces the expected slot values with realised
        per-slot values; the optimal policy then shifts them by the table's
        future-value term ``Phi - v``.
        """
        g = np.asarray(g)
        base = self.values[g]
        v = base if values is None else np.asarray(values)
        if self.variant == TRUTHFUL:
            return np.broadcast_to(v, np.broadcast(n_m, n_w, g).shape).astype(float)
        allowed = constraint.allowed(n_m, n_w, g)
        if self.variant == NAIVE:
            return np.where(allowed, v, 0.0)
        table = self.table
        if isinstance(table, ParityValueTable):
            phi = table.Phi[np.clip(np.asarray(n_m) - np.asarray(n_w), -table.K, table.K) + table.K, g]
        else:
            phi = _ratio_phi(table, np.asarray(n_m), np.asarray(n_w), g)
        return np.where(allowed, np.maximum(v + (phi - base), 0.0), 0.0)


def _ratio_phi(table: RatioValueTable, n_m, n_w, g):
    n_m, n_w, g = np.broadcast_arrays(n_m, n_w, g)
    out = np.empty(n_m.shape)
    inside = table.in_grid(n_m, n_w)
    out[inside] = table.Phi[n_m[inside], n_w[inside], g[inside]]
    if not np.all(inside):
        out[~inside] = _interpolate(table, n_m[~inside], n_w[~inside], g[~inside])
    return out


def allowed_to_win(ledger: ConstraintLedger, theta) -> bool:
    return ledger.allowed_to_win(theta)


def record_outcome(ledger: ConstraintLedger, theta, won: bool) -> ConstraintLedger:
    return ledger.record_outcome(theta, won)


def bid(policy: BiddingPolicy, ledger: ConstraintLedger, theta) -> float:
    """Bid of ``policy`` for a slot of type ``theta`` given the ledger state."""
    g = group_index(theta)
    if policy.variant == TRUTHFUL:
        return (policy.v_m, policy.v_w)[g]
    if policy.variant == NAIVE:
        return (policy.v_m, policy.v_w)[g] if ledger.allowed_to_win(g) else 0.0
    policy.check(ledger.constraint)
    table = policy.table
    if isinstance(table, ParityValueTable):
        return table.bid(ledger.n_m - ledger.n_w, g)
    return table.bid(ledger.n_m, ledger.n_w, g)
