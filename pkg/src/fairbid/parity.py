"""K-absolute-parity solver.

States are ``(k, theta)`` where ``k = n_m - n_w`` lies in ``[-K, K]`` and
``theta`` is the type of the slot being auctioned. Winning a male slot moves
``k`` up, a female slot moves it down; ``(K, m)`` and ``(-K, w)`` are edge
states where the advertiser must sit the auction out.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from fairbid import _bellman
from fairbid._bellman import SolverConfig
from fairbid.distributions import FEMALE, MALE, MarketModel, WinCurve, group_index
from fairbid.errors import ConfigError, EdgeStateError, StateError

log = logging.getLogger(__name__)

__all__ = [
    "ParityValueTable",
    "SolverConfig",
    "conjoint_valuation",
    "future_value",
    "immediate_reward",
    "optimal_parity_bid",
    "solve_parity",
]


@dataclass(eq=False)
class ParityValueTable:
    """Solved values ``V[k + K, g]`` and conjoint valuations ``Phi[k + K, g]``.

    ``Phi`` holds zero at the two edge states. Tables are treated as immutable
    once returned by `solve_parity`.
    """

    K: int
    V: np.ndarray
    Phi: np.ndarray
    converged_delta: float
    iterations: int
    epsilon: float
    fingerprint: str = ""
    p: float | None = None
    trace: list = field(default_factory=list, repr=False)
    seconds: float = 0.0

    def __post_init__(self):
        shape = (2 * self.K + 1, 2)
        if self.V.shape != shape or self.Phi.shape != shape:
            raise ConfigError(f"parity table arrays must have shape {shape}")
        # plain lists make the per-auction lookup a couple of pointer hops
        bids = np.maximum(self.Phi, 0.0)
        bids[-1, MALE] = 0.0
        bids[0, FEMALE] = 0.0
        self._bids = [bids[:, MALE].tolist(), bids[:, FEMALE].tolist()]
        self._bid_array = bids

    def _row(self, k: int) -> int:
        if not -self.K <= k <= self.K:
            raise StateError(f"k={k} outside [-{self.K}, {self.K}]")
        return k + self.K

    def is_edge(self, k: int, theta) -> bool:
        g = group_index(theta)
        return (g == MALE and k == self.K) or (g == FEMALE and k == -self.K)

    def value(self, k: int, theta) -> float:
        return float(self.V[self._row(k), group_index(theta)])

    def phi(self, k: int, theta) -> float:
        return float(self.Phi[self._row(k), group_index(theta)])

    def bid(self, k: int, g: int) -> float:
        """Look-up used on the bidding hot path; ``g`` is 0 (m) or 1 (w)."""
        if -self.K <= k <= self.K:
            return self._bids[g][k + self.K]
        raise StateError(f"k={k} outside [-{self.K}, {self.K}]")

    def bids(self, k: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Vectorised look-up for arrays of states."""
        return self._bid_array[np.asarray(k) + self.K, g]

    def states(self):
        for k in range(-self.K, self.K + 1):
            for theta in ("m", "w"):
                yield k, theta


def immediate_reward(model: MarketModel, theta, b, curve: WinCurve | None = None):
    """Expected one-auction reward ``q(b) v - c(b)`` of bidding ``b``."""
    if curve is None:
        cfg = SolverConfig()
        curve = _bellman.win_curves(model, cfg)[group_index(theta)]
    return curve.q(b) * model.value(theta) - curve.cost(b)


def _successor_mixtures(model: MarketModel, V: np.ndarray):
    lose = _bellman.mixture(model, V)
    win = np.empty_like(V)
    win[:-1, MALE] = lose[1:]
    win[-1, MALE] = lose[-1]  # edge; never used as a bid
    win[1:, FEMALE] = lose[:-1]
    win[0, FEMALE] = lose[0]
    return win, lose


def future_value(table: ParityValueTable, model: MarketModel, theta, k: int, b: float, curve=None) -> float:
    """Expected continuation value ``q N_win + (1 - q) N_lose`` of bidding ``b``."""
    g = group_index(theta)
    row = table._row(k)
    lose = _bellman.mixture(model, table.V)
    if b == 0:
        return float(lose[row])
    if table.is_edge(k, theta):
        raise EdgeStateError(f"state ({k}, {theta}) is an edge state; only a zero bid is allowed")
    win_row = row + 1 if g == MALE else row - 1
    if curve is None:
        curve = _bellman.win_curves(model, SolverConfig())[g]
    q = float(curve.q(b))
    return q * float(lose[win_row]) + (1.0 - q) * float(lose[row])


def conjoint_valuation(table: ParityValueTable, model: MarketModel, theta, k: int) -> float:
    """``v + delta (Phi_win - Phi_lose)`` from the table's values."""
    row = table._row(k)
    if table.is_edge(k, theta):
        raise EdgeStateError(f"state ({k}, {theta}) is an edge state")
    g = group_index(theta)
    lose = _bellman.mixture(model, table.V)
    win_row = row + 1 if g == MALE else row - 1
    return model.value(theta) + model.delta * (float(lose[win_row]) - float(lose[row]))


def edge_mask(K: int) -> np.ndarray:
    blocked = np.zeros((2 * K + 1, 2), dtype=bool)
    blocked[-1, MALE] = True
    blocked[0, FEMALE] = True
    return blocked


def solve_parity(model: MarketModel, K: int, cfg: SolverConfig | None = None) -> ParityValueTable:
    """Iterate the parity Bellman operator to its fixed point.

    Raises:
        NonConvergenceError: if ``cfg.max_iterations`` sweeps do not bring the
            max change under ``cfg.epsilon``.
    """
    if int(K) != K or K < 1:
        raise ConfigError("K must be an integer >= 1")
    K = int(K)
    cfg = cfg or SolverConfig()
    curves = _bellman.win_curves(model, cfg)
    blocked = edge_mask(K)

    def step(V):
        win, lose = _successor_mixtures(model, V)
        return _bellman.update(model, curves, win, lose, blocked)[0]

    V0 = np.full((2 * K + 1, 2), 0.5 * (model.v_m + model.v_w))
    V, delta, iterations, trace, seconds = _bellman.iterate(step, V0, cfg, log)
    win, lose = _successor_mixtures(model, V)
    Phi = np.where(blocked, 0.0, _bellman.conjoint(model, win, lose))
    log.info("parity K=%d solved in %d sweeps (%.2fs), delta=%.2e", K, iterations, seconds, delta)
    return ParityValueTable(
        K=K,
        V=V,
        Phi=Phi,
        converged_delta=delta,
        iterations=iterations,
        epsilon=cfg.epsilon,
        fingerprint=model.fingerprint(),
        p=model.p,
        trace=trace,
        seconds=seconds,
    )


def optimal_parity_bid(table: ParityValueTable, k: int, theta) -> float:
    """Bid at state ``(k, theta)``: zero at the edges, ``max(Phi, 0)`` elsewhere."""
    return table.bid(k, group_index(theta))
