"""(r, K)-ratio solver over the bounded ``(n_m, n_w)`` grid.

The constraint ``r p_i n_j <= p_j n_i + K`` must hold for both orderings of
the two groups after every auction. Unlike parity it depends on the absolute
counts, so the state space is truncated at ``mu`` male wins and
``ceil(r (1 - p) / p * mu + K)`` female wins. Bids for states past the grid
are projected back onto the last solved male row by linear interpolation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from fairbid import _bellman
from fairbid._bellman import SolverConfig
from fairbid.distributions import FEMALE, MALE, MarketModel, group_index
from fairbid.errors import ConfigError, StateError

log = logging.getLogger(__name__)

_TOL = 1e-12


def male_win_blocked(r, K, p, n_m, n_w):
    """True where winning a male slot would break the ratio constraint."""
    return r * (1.0 - p) * (np.asarray(n_m) + 1) > p * np.asarray(n_w) + K + _TOL


def female_win_blocked(r, K, p, n_m, n_w):
    """True where winning a female slot would break the ratio constraint."""
    return r * p * (np.asarray(n_w) + 1) > (1.0 - p) * np.asarray(n_m) + K + _TOL


def is_feasible(r, K, p, n_m, n_w):
    n_m, n_w = np.asarray(n_m), np.asarray(n_w)
    return (r * p * n_w <= (1.0 - p) * n_m + K + _TOL) & (r * (1.0 - p) * n_m <= p * n_w + K + _TOL)


def check_params(r, K, p):
    if not 0.0 < r <= 1.0:
        raise ConfigError("r must lie in (0, 1]")
    if K < 0:
        raise ConfigError("K must be non-negative")
    if not 0.0 < p < 1.0:
        raise ConfigError("the ratio constraint needs 0 < p < 1")


def female_bound(r, K, p, mu) -> int:
    return int(math.ceil(r * (1.0 - p) / p * mu + K - 1e-9))


@dataclass(eq=False)
class RatioValueTable:
    """Solved ``V[n_m, n_w, g]`` and ``Phi[n_m, n_w, g]`` on the truncated grid.

    ``Phi`` is zero at blocked cells.
    """

    r: float
    K: float
    p: float
    mu: int
    n_w_max: int
    V: np.ndarray
    Phi: np.ndarray
    converged_delta: float
    iterations: int
    epsilon: float
    fingerprint: str = ""
    trace: list = field(default_factory=list, repr=False)
    seconds: float = 0.0

    def __post_init__(self):
        shape = (self.mu + 1, self.n_w_max + 1, 2)
        if self.V.shape != shape or self.Phi.shape != shape:
            raise ConfigError(f"ratio table arrays must have shape {shape}")
        bids = np.maximum(self.Phi, 0.0)
        n_m = np.arange(self.mu + 1)[:, None]
        n_w = np.arange(self.n_w_max + 1)[None, :]
        bids[..., MALE][male_win_blocked(self.r, self.K, self.p, n_m, n_w)] = 0.0
        bids[..., FEMALE][female_win_blocked(self.r, self.K, self.p, n_m, n_w)] = 0.0
        self._bid_array = bids
        # per-cell (male bid, female bid), None where the counts are infeasible;
        # rows past mu - 1 are left out so they go through extrapolation
        feasible = is_feasible(self.r, self.K, self.p, n_m, n_w)
        self._cells = [
            [tuple(bids[a, b].tolist()) if feasible[a, b] else None for b in range(self.n_w_max + 1)]
            for a in range(self.mu)
        ]

    def blocked(self, n_m, n_w, g):
        g = np.asarray(g)
        return np.where(
            g == MALE,
            male_win_blocked(self.r, self.K, self.p, n_m, n_w),
            female_win_blocked(self.r, self.K, self.p, n_m, n_w),
        )

    def in_grid(self, n_m, n_w):
        return (np.asarray(n_m) < self.mu) & (np.asarray(n_w) <= self.n_w_max)

    def bid(self, n_m: int, n_w: int, g: int) -> float:
        """Scalar look-up on the bidding hot path; ``g`` is 0 (m) or 1 (w)."""
        if 0 <= n_m < self.mu and 0 <= n_w <= self.n_w_max:
            cell = self._cells[n_m][n_w]
            if cell is not None:
                return cell[g]
            raise StateError(f"state ({n_m}, {n_w}) is infeasible")
        r, K, p = self.r, self.K, self.p
        if n_m < 0 or n_w < 0 or not (r * p * n_w <= (1 - p) * n_m + K + _TOL and r * (1 - p) * n_m <= p * n_w + K + _TOL):
            raise StateError(f"state ({n_m}, {n_w}) is infeasible")
        if g == MALE:
            if r * (1 - p) * (n_m + 1) > p * n_w + K + _TOL:
                return 0.0
        elif r * p * (n_w + 1) > (1 - p) * n_m + K + _TOL:
            return 0.0
        return extrapolated_bid(self, n_m, n_w, g)

    def bids(self, n_m, n_w, g) -> np.ndarray:
        """Vectorised bids for arrays of (feasible) states."""
        n_m, n_w, g = np.broadcast_arrays(np.asarray(n_m), np.asarray(n_w), np.asarray(g))
        out = np.zeros(n_m.shape)
        inside = self.in_grid(n_m, n_w)
        out[inside] = self._bid_array[n_m[inside], n_w[inside], g[inside]]
        outside = ~inside
        if np.any(outside):
            out[outside] = np.maximum(_interpolate(self, n_m[outside], n_w[outside], g[outside]), 0.0)
        out[self.blocked(n_m, n_w, g)] = 0.0
        return out


def _interpolate(table: RatioValueTable, n_m, n_w, g):
    n_m = np.asarray(n_m, dtype=float)
    if np.any(n_m <= 0):
        raise StateError("extrapolation needs n_m >= 1")
    row = table.mu - 1
    rho = np.asarray(n_w, dtype=float) / n_m * row
    lo = np.clip(np.floor(rho), 0, table.n_w_max).astype(np.int64)
    hi = np.clip(np.ceil(rho), 0, table.n_w_max).astype(np.int64)
    frac = np.where(hi > lo, rho - np.floor(rho), 0.0)
    f_lo = table.Phi[row, lo, g]
    f_hi = table.Phi[row, hi, g]
    return f_lo + frac * (f_hi - f_lo)


def extrapolated_bid(table: RatioValueTable, n_m, n_w, theta) -> float:
    """Bid for a state beyond the solved grid.

    Projects the state onto male row ``mu - 1`` at the female index
    ``rho = n_w / n_m * (mu - 1)`` and interpolates ``Phi`` linearly between
    ``floor(rho)`` and ``ceil(rho)``, both clamped to the table.
    """
    if n_m < 1:
        raise StateError("extrapolation needs n_m >= 1")
    g = group_index(theta)
    return max(float(_interpolate(table, n_m, n_w, g)), 0.0)


def _grid_masks(r, K, p, mu, n_w_max):
    n_m = np.arange(mu + 1)[:, None]
    n_w = np.arange(n_w_max + 1)[None, :]
    blocked = np.empty((mu + 1, n_w_max + 1, 2), dtype=bool)
    blocked[..., MALE] = male_win_blocked(r, K, p, n_m, n_w)
    blocked[..., FEMALE] = female_win_blocked(r, K, p, n_m, n_w)
    return blocked


def _successor_mixtures(model: MarketModel, V: np.ndarray):
    lose = _bellman.mixture(model, V)
    win = np.empty_like(V)
    win[:-1, :, MALE] = lose[1:, :]
    win[-1, :, MALE] = lose[-1, :]  # wins off the grid loop back to the cell
    win[:, :-1, FEMALE] = lose[:, 1:]
    win[:, -1, FEMALE] = lose[:, -1]
    return win, lose


def solve_ratio(model: MarketModel, r: float, K: float, mu: int, cfg: SolverConfig | None = None) -> RatioValueTable:
    """Iterate the ratio Bellman operator over the truncated grid.

    Raises:
        ConfigError: for ``p`` outside (0, 1), ``r`` outside (0, 1] or ``mu < 1``.
        NonConvergenceError: if the sweep cap is reached first.
    """
    check_params(r, K, model.p)
    if int(mu) != mu or mu < 1:
        raise ConfigError("mu must be an integer >= 1")
    mu = int(mu)
    cfg = cfg or SolverConfig()
    n_w_max = female_bound(r, K, model.p, mu)
    curves = _bellman.win_curves(model, cfg)
    blocked = _grid_masks(r, K, model.p, mu, n_w_max)

    def step(V):
        win, lose = _successor_mixtures(model, V)
        return _bellman.update(model, curves, win, lose, blocked)[0]

    V0 = np.full((mu + 1, n_w_max + 1, 2), 0.5 * (model.v_m + model.v_w))
    V, delta, iterations, trace, seconds = _bellman.iterate(step, V0, cfg, log)
    win, lose = _successor_mixtures(model, V)
    Phi = np.where(blocked, 0.0, _bellman.conjoint(model, win, lose))
    log.info("ratio (%g,%g) mu=%d solved in %d sweeps (%.2fs)", r, K, mu, iterations, seconds)
    return RatioValueTable(
        r=float(r),
        K=float(K),
        p=model.p,
        mu=mu,
        n_w_max=n_w_max,
        V=V,
        Phi=Phi,
        converged_delta=delta,
        iterations=iterations,
        epsilon=cfg.epsilon,
        fingerprint=model.fingerprint(),
        trace=trace,
        seconds=seconds,
    )


def optimal_ratio_bid(table: RatioValueTable, n_m: int, n_w: int, theta) -> float:
    """Zero when blocked, the table's ``Phi`` inside the grid, extrapolated outside."""
    return table.bid(int(n_m), int(n_w), group_index(theta))
