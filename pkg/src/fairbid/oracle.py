"""Brute-force and closed-form references for checking the solvers.

Nothing here is used to place bids. Win probabilities and costs are rebuilt
from scipy primitives on a fine grid so they share no code with
`fairbid.distributions.WinCurve`.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg, stats

from fairbid.distributions import EMPIRICAL, FEMALE, MALE, BidDistribution, MarketModel, group_index
from fairbid.errors import ConfigError, InvalidInputError
from fairbid.strategies import PARITY, RATIO, Constraint

MAX_HORIZON = 8
MAX_GRID = 401
MAX_STATES = 200
REFINE = 8


def _cdf(dist: BidDistribution, x):
    x = np.asarray(x, dtype=float)
    if dist.kind == EMPIRICAL:
        n = dist.samples.size
        return np.interp(x, dist.samples, np.arange(n) / (n - 1), left=0.0, right=1.0)
    return stats.lognorm.cdf(x, s=math.sqrt(dist.sigma_sq), scale=math.exp(dist.mu))


def win_and_cost(dist: BidDistribution, alpha: int, bids):
    """``q(b)`` and ``c(b)`` at grid points ``bids`` (ascending, starting at 0).

    The integral of ``q`` is a trapezoid sum on a mesh ``REFINE`` times finer
    than the spacing of ``bids``.
    """
    bids = np.asarray(bids, dtype=float)
    if bids[0] != 0 or np.any(np.diff(bids) <= 0):
        raise InvalidInputError("bid grid must start at 0 and increase")
    fine = np.concatenate([np.linspace(a, b, REFINE, endpoint=False) for a, b in zip(bids[:-1], bids[1:])] + [bids[-1:]])
    q_fine = _cdf(dist, fine) ** (alpha - 1)
    area = integrate.cumulative_trapezoid(q_fine, fine, initial=0.0)[::REFINE]
    q = _cdf(dist, bids) ** (alpha - 1)
    return q, np.maximum(q * bids - area, 0.0)


def bid_grid(model: MarketModel, grid_step: float, b_max: float | None = None) -> np.ndarray:
    if not grid_step > 0:
        raise ConfigError("grid_step must be positive")
    top = b_max if b_max is not None else max(model.default_b_max(), 2.0 * max(model.v_m, model.v_w))
    return np.arange(0.0, top + 0.5 * grid_step, grid_step)


def grid_search_best_bid(model: MarketModel, theta, phi: float, grid_step: float, b_max: float | None = None) -> float:
    """Grid argmax of ``q(b) phi - c(b)``; ties resolve to the lower bid."""
    grid = bid_grid(model, grid_step, b_max)
    q, cost = win_and_cost(model.dist(theta), model.alpha, grid)
    return float(grid[int(np.argmax(q * phi - cost))])


@dataclass
class GridSearchReport:
    state: str
    theta: str
    best_bid: float
    phi_bid: float
    gap: float
    objective_gap: float


def check_table(table, model: MarketModel, grid_step: float, b_max: float | None = None) -> list[GridSearchReport]:
    """Grid-search every non-blocked state of a parity or ratio table.

    The objective at each state is rebuilt from the table's values ``V``
    (immediate reward plus the discounted win/lose continuation), so a stored
    ``Phi`` that disagrees with ``V`` shows up as a gap.
    """
    grid = bid_grid(model, grid_step, b_max)
    curves = [win_and_cost(model.dist(g), model.alpha, grid) for g in (MALE, FEMALE)]
    reports = []
    for label, g, phi, win, lose in _table_states(table, model.p):
        q, cost = curves[g]
        objective = q * model.value(g) - cost + model.delta * (q * win + (1.0 - q) * lose)
        j = int(np.argmax(objective))
        phi_bid = max(phi, 0.0)
        at_phi = np.interp(phi_bid, grid, objective)
        reports.append(GridSearchReport(label, "mw"[g], float(grid[j]), phi_bid, abs(float(grid[j]) - phi_bid), float(objective[j] - at_phi)))
    return reports


def _table_states(table, p: float):
    """Yield ``(label, g, stored Phi, win value, lose value)`` per biddable state."""
    from fairbid.parity import ParityValueTable
    from fairbid.ratio import is_feasible

    V = np.asarray(table.V)

    def mix(*idx):
        return p * float(V[idx + (MALE,)]) + (1.0 - p) * float(V[idx + (FEMALE,)])

    if isinstance(table, ParityValueTable):
        K = table.K
        for k in range(-K, K + 1):
            for g in (MALE, FEMALE):
                if table.is_edge(k, g):
                    continue
                nxt = k + (1 if g == MALE else -1)
                yield f"k={k}", g, float(table.Phi[k + K, g]), mix(nxt + K), mix(k + K)
        return
    for n_m, n_w in itertools.product(range(table.mu + 1), range(table.n_w_max + 1)):
        if not is_feasible(table.r, table.K, table.p, n_m, n_w):
            continue
        for g in (MALE, FEMALE):
            if table.blocked(n_m, n_w, g):
                continue
            # a win off the solved grid stays in the boundary cell
            if g == MALE:
                nxt = (min(n_m + 1, table.mu), n_w)
            else:
                nxt = (n_m, min(n_w + 1, table.n_w_max))
            yield f"n_m={n_m};n_w={n_w}", g, float(table.Phi[n_m, n_w, g]), mix(*nxt), mix(n_m, n_w)


def write_reports(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("state", "theta", "best_bid", "phi_bid", "gap", "objective_gap"))
        for r in reports:
            writer.writerow((r.state, r.theta, repr(r.best_bid), repr(r.phi_bid), repr(r.gap), repr(r.objective_gap)))


def _state_graph(constraint: Constraint, T: int):
    """States reachable within ``T`` wins, with the win successor per gender (None when blocked)."""
    if constraint.kind == PARITY:
        K = int(constraint.K)
        states = [(k,) for k in range(-K, K + 1)]

        def succ(s, g):
            k = s[0] + (1 if g == MALE else -1)
            return (k,) if abs(k) <= K else None

        return states, succ
    if constraint.kind == RATIO:
        states = [(a, b) for a in range(T + 1) for b in range(T + 1 - a) if constraint.satisfied(a, b)]
    else:
        states = [(a, b) for a in range(T + 1) for b in range(T + 1 - a)]

    def succ(s, g):
        nxt = (s[0] + 1, s[1]) if g == MALE else (s[0], s[1] + 1)
        return nxt if constraint.allowed(s[0], s[1], g) else None

    return states, succ


def finite_horizon_expectimax(model: MarketModel, constraint: Constraint, T: int, bids) -> dict:
    """Backward induction over ``T`` auctions with zero terminal value.

    Returns ``{(state, theta): V_T}`` where ``state`` is ``(k,)`` for parity and
    ``(n_m, n_w)`` otherwise, maximising over the supplied bid grid.

    Raises:
        ConfigError: if ``T``, the grid or the state space exceed the caps.
    """
    bids = np.asarray(bids, dtype=float)
    if not 1 <= T <= MAX_HORIZON:
        raise ConfigError(f"horizon must lie in [1, {MAX_HORIZON}]")
    if bids.size > MAX_GRID:
        raise ConfigError(f"bid grid holds {bids.size} points; the cap is {MAX_GRID}")
    states, succ = _state_graph(constraint, T)
    if len(states) > MAX_STATES:
        raise ConfigError(f"{len(states)} states exceed the cap of {MAX_STATES}")
    curves = [win_and_cost(model.dist(g), model.alpha, bids) for g in (MALE, FEMALE)]
    V = {(s, g): 0.0 for s in states for g in (MALE, FEMALE)}

    def mix(s, table):
        if s not in {x for x, _ in table}:
            return 0.0
        return model.p * table[(s, MALE)] + (1.0 - model.p) * table[(s, FEMALE)]

    for _ in range(T):
        new = {}
        for s in states:
            lose = mix(s, V)
            for g in (MALE, FEMALE):
                nxt = succ(s, g)
                if nxt is None:
                    new[(s, g)] = model.delta * lose
                    continue
                q, cost = curves[g]
                win = mix(nxt, V)
                objective = q * model.value(g) - cost + model.delta * (q * win + (1.0 - q) * lose)
                new[(s, g)] = float(np.max(objective))
        V = new
    return V


def deterministic_sequence(slots, competitor_bids, values, K: int, delta: float = 1.0, bids=None):
    """Exact play against known slot types and fixed highest competing bids.

    The focal advertiser wins a slot when its bid is at least the competing
    bid and pays that bid. Returns ``(total, plan)`` for the best plan under
    K-parity, where ``plan`` lists ``(bid, won)`` per slot.
    """
    slots = [group_index(s) for s in slots]
    if bids is None:
        top = max(max(competitor_bids), max(values)) + 2.0
        bids = np.arange(0.0, top + 0.5, 1.0)

    def best(t, k):
        if t == len(slots):
            return 0.0, []
        g, c = slots[t], competitor_bids[t]
        options = []
        for b in bids:
            won = b > 0 and b >= c
            step = 1 if g == MALE else -1
            if won and abs(k + step) > K:
                continue
            gain = values[g] - c if won else 0.0
            rest, plan = best(t + 1, k + step if won else k)
            options.append((gain + delta * rest, -b, [(float(b), won)] + plan))
        total, _, plan = max(options, key=lambda o: (round(o[0], 12), o[1]))
        return total, plan

    return best(0, 0)


def naive_sequence_total(slots, competitor_bids, values, K: int, delta: float = 1.0) -> float:
    """Total of screen-then-truthful play on a known sequence."""
    k, total = 0, 0.0
    for t, (s, c) in enumerate(zip(slots, competitor_bids)):
        g = group_index(s)
        step = 1 if g == MALE else -1
        if abs(k + step) <= K and values[g] >= c:
            total += delta**t * (values[g] - c)
            k += step
    return total


def steady_state_participation(p: float, K: int) -> float:
    """Long-run share of auctions a screened K-parity advertiser may enter.

    Assumes the advertiser wins whenever it participates, so the win
    difference performs a reflecting walk on ``[-K, K]``.
    """
    if not 0.0 < p < 1.0:
        raise InvalidInputError("p must lie in (0, 1)")
    if K < 1:
        raise InvalidInputError("K must be >= 1")
    if abs(p - 0.5) < 1e-12:
        return 2 * K / (2 * K + 1)
    rho = (p / (1.0 - p)) ** (2 * K)
    return 2 * p * (1 - p) * (1 - rho) / (1 - p * (1 + rho))


def participation_chain(p: float, K: int) -> float:
    """Participation probability from the chain's stationary law, solved numerically."""
    n = 2 * K + 1
    P = np.zeros((n, n))
    for i in range(n):
        up, down = min(i + 1, n - 1), max(i - 1, 0)
        P[i, up] += p
        P[i, down] += 1.0 - p
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi = linalg.lstsq(A, rhs)[0]
    return float(1.0 - pi[-1] * p - pi[0] * (1.0 - p))
