"""Vectorised Bellman sweep shared by the parity and ratio solvers.

Both MDPs have the same one-step structure once the successor mixtures are
known: for a state with slot type ``theta`` the conjoint valuation is

    phi = v_theta + delta * (win - lose)

and the optimal bid is ``max(phi, 0)`` (zero at blocked states). The new
value is ``R(bid) + delta * N(bid)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from fairbid.distributions import FEMALE, MALE, MarketModel, WinCurve
from fairbid.errors import ConfigError, NonConvergenceError


@dataclass(frozen=True)
class SolverConfig:
    """Value-iteration settings.

    ``epsilon`` is an absolute tolerance in price units on the max-norm change
    of one sweep. ``quad_step`` defaults to ``b_max / 1000`` and ``b_max`` to
    the larger 99.9th percentile of the two competing-bid distributions.
    """

    epsilon: float = 1e-3
    quad_step: float | None = None
    max_iterations: int = 100_000
    b_max: float | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.quad_step is not None and not self.quad_step > 0:
            raise ConfigError("quad_step must be positive")
        if self.b_max is not None and not self.b_max > 0:
            raise ConfigError("b_max must be positive")

    def resolve(self, model: MarketModel) -> tuple[float, float]:
        b_max = self.b_max if self.b_max is not None else model.default_b_max()
        step = self.quad_step if self.quad_step is not None else b_max / 1000.0
        return b_max, step


def win_curves(model: MarketModel, cfg: SolverConfig) -> tuple[WinCurve, WinCurve]:
    b_max, step = cfg.resolve(model)
    upper = max(b_max, 2.0 * max(model.v_m, model.v_w))
    return (
        WinCurve(model.g_m, model.alpha, step, upper),
        WinCurve(model.g_w, model.alpha, step, upper),
    )


def mixture(model: MarketModel, V: np.ndarray) -> np.ndarray:
    """``p V(., m) + (1 - p) V(., w)`` over the last axis."""
    return model.p * V[..., MALE] + (1.0 - model.p) * V[..., FEMALE]


def conjoint(model: MarketModel, win: np.ndarray, lose: np.ndarray) -> np.ndarray:
    return model.values + model.delta * (win - lose[..., None])


def update(model, curves, win, lose, blocked):
    """One Jacobi sweep. Returns the new values and the conjoint valuations."""
    phi = conjoint(model, win, lose)
    bids = np.where(blocked, 0.0, np.maximum(phi, 0.0))
    V_new = np.empty_like(phi)
    for g, curve in ((MALE, curves[0]), (FEMALE, curves[1])):
        b = bids[..., g]
        qb, area = curve.q_and_integral(b)
        q = np.where(blocked[..., g], 0.0, qb)
        cost = np.where(blocked[..., g], 0.0, q * b - area)
        reward = q * model.values[g] - cost
        V_new[..., g] = reward + model.delta * (q * win[..., g] + (1.0 - q) * lose)
    return V_new, phi


def iterate(step, V0: np.ndarray, cfg: SolverConfig, log=None):
    """Run ``V <- step(V)`` until the max change drops below ``cfg.epsilon``.

    Returns ``(V, last_delta, iterations, trace, seconds)``. The trace keeps
    the change of every sweep up to 1000 entries, then every 100th.
    """
    V = V0
    trace: list[float] = []
    start = time.perf_counter()
    delta = math.inf
    for it in range(1, cfg.max_iterations + 1):
        V_new = step(V)
        delta = float(np.max(np.abs(V_new - V)))
        V = V_new
        if it <= 1000 or it % 100 == 0:
            trace.append(delta)
        if log is not None and it % 1000 == 0:
            log.debug("sweep %d: delta=%.3e", it, delta)
        if delta < cfg.epsilon:
            return V, delta, it, trace, time.perf_counter() - start
    raise NonConvergenceError(
        f"no convergence after {cfg.max_iterations} sweeps (last delta {delta:.3e})",
        last_delta=delta,
        trace=trace,
    )
