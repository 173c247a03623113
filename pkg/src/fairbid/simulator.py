"""Repeated second-price auctions with a focal, possibly constrained, advertiser.

Episodes are simulated in batches: every array has one row per episode and the
loop advances all episodes one round at a time. Random draws come from three
streams spawned from each episode's seed (slot genders, competitor bids,
lifespan), so two runs that differ only in the focal policy see exactly the
same slots and the same competitor bids.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from fairbid.distributions import FEMALE, MALE, BidDistribution, MarketModel
from fairbid.errors import ConfigError, ConstraintViolation, InvalidInputError
from fairbid.strategies import NONE, TRUTHFUL, BiddingPolicy, Constraint

FIXED, GEOMETRIC = "fixed", "geometric"
DRAWN, COPY = "drawn", "copy"
TAIL_WEIGHT = 1e-6


def run_auction(bids, rng=None) -> tuple[int, float]:
    """Highest bid wins and pays the highest of the others; ties go to the lowest index."""
    b = np.asarray(bids, dtype=float)
    if b.ndim != 1 or b.size < 2:
        raise InvalidInputError("an auction needs at least two bids")
    if np.any(b < 0) or not np.all(np.isfinite(b)):
        raise InvalidInputError("bids must be finite and non-negative")
    winner = int(np.argmax(b))
    return winner, float(np.max(np.delete(b, winner)))


def fixed_horizon(delta: float, v_max: float) -> int:
    """Rounds needed until ``delta**T * v_max`` drops below 1e-6."""
    if delta <= 0 or v_max <= TAIL_WEIGHT:
        return 1
    return max(1, math.ceil(math.log(TAIL_WEIGHT / v_max) / math.log(delta)))


@dataclass(frozen=True, eq=False)
class Scenario:
    """One experiment cell: the market, the constraint and the run protocol.

    ``restricted_count`` counts constrained advertisers among the ``alpha``
    bidders, the focal one included. With ``clone_model="copy"`` the extra
    ones are copies of the focal advertiser (same values, same policy, own
    ledgers); with ``"drawn"`` they draw a value per slot from the competitor
    distribution and bid it shifted by the policy's ``Phi - v`` margin.
    """

    model: MarketModel
    constraint: Constraint = field(default_factory=Constraint.none)
    competitor_g_m: BidDistribution | None = None
    competitor_g_w: BidDistribution | None = None
    restricted_count: int = 1
    horizon: str = FIXED
    T: int | None = None
    runs: int = 100
    seed: int = 0
    scenario_id: str = ""
    clone_model: str = COPY

    def __post_init__(self):
        if not 0 <= self.restricted_count <= self.model.alpha:
            raise ConfigError("restricted_count must lie in [0, alpha]")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.horizon not in (FIXED, GEOMETRIC):
            raise ConfigError(f"unknown horizon mode {self.horizon!r}")
        if self.clone_model not in (DRAWN, COPY):
            raise ConfigError(f"unknown clone model {self.clone_model!r}")
        if self.T is not None and self.T < 1:
            raise ConfigError("T must be >= 1")

    @property
    def competitors(self) -> tuple[BidDistribution, BidDistribution]:
        return (self.competitor_g_m or self.model.g_m, self.competitor_g_w or self.model.g_w)

    @property
    def clones(self) -> int:
        return max(self.restricted_count - 1, 0)

    def fixed_T(self) -> int:
        if self.T is not None:
            return self.T
        return fixed_horizon(self.model.delta, max(self.model.v_m, self.model.v_w))

    def episode_seeds(self, seed: int | None = None) -> np.ndarray:
        base = self.seed if seed is None else seed
        return np.random.SeedSequence(base).generate_state(self.runs).astype(np.int64)

    def unrestricted(self) -> "Scenario":
        return replace(self, constraint=Constraint.none())


@dataclass
class SimulationResult:
    """Outcome of one episode for the focal advertiser and the exchange."""

    seed: int
    total_utility: float
    wins_m: int
    wins_w: int
    sum_overbid_w: float
    participations_w: int
    participations: int
    exchange_revenue: float
    payments: float
    gross_value: float
    rounds: int
    violations: int = 0

    @property
    def avg_overbid_w(self) -> float:
        return self.sum_overbid_w / self.participations_w if self.participations_w else float("nan")


@dataclass
class EpisodeBatch:
    """Per-episode result arrays for one (scenario, policy) pair."""

    policy: str
    seeds: np.ndarray
    total_utility: np.ndarray
    wins_m: np.ndarray
    wins_w: np.ndarray
    sum_overbid_w: np.ndarray
    participations_w: np.ndarray
    participations: np.ndarray
    exchange_revenue: np.ndarray
    payments: np.ndarray
    gross_value: np.ndarray
    rounds: np.ndarray
    violations: np.ndarray
    scenario_id: str = ""

    def __len__(self):
        return len(self.seeds)

    def episode(self, i: int) -> SimulationResult:
        kw = {}
        for f in fields(SimulationResult):
            v = getattr(self, "seeds" if f.name == "seed" else f.name)[i]
            kw[f.name] = v.item() if hasattr(v, "item") else v
        return SimulationResult(**kw)

    def results(self) -> list[SimulationResult]:
        return [self.episode(i) for i in range(len(self))]


@dataclass
class _Draws:
    theta: np.ndarray  # (R, T) 0 = male slot
    top1: np.ndarray  # highest unconstrained competitor bid
    top2: np.ndarray  # second highest, 0 when absent
    clone_values: np.ndarray  # (R, T, clones)
    lifespan: np.ndarray  # (R,)


def _episode_draws(scenario: Scenario, seed: int, T: int):
    gender_ss, comp_ss, life_ss = np.random.SeedSequence(int(seed)).spawn(3)
    if scenario.horizon == GEOMETRIC:
        life = int(np.random.Generator(np.random.PCG64(life_ss)).geometric(1.0 - scenario.model.delta))
    else:
        life = T
    u_gender = np.random.Generator(np.random.PCG64(gender_ss)).random(life)
    u_comp = np.random.Generator(np.random.PCG64(comp_ss)).random((life, scenario.model.alpha - 1))
    return life, u_gender, u_comp


def _draw_batch(scenario: Scenario, seeds, nc: int) -> _Draws:
    """Materialise an episode batch; ``nc`` leading competitor columns become
    constrained clones, the rest collapse to their top two bids."""
    T = scenario.fixed_T()
    raw = [_episode_draws(scenario, s, T) for s in seeds]
    life = np.array([r[0] for r in raw])
    T_max = int(life.max())
    R = len(seeds)
    g_m, g_w = scenario.competitors
    theta = np.ones((R, T_max), dtype=np.int64)
    top1 = np.zeros((R, T_max))
    top2 = np.zeros((R, T_max))
    clone_values = np.zeros((R, T_max, nc))
    for i, (n, u_gender, u_comp) in enumerate(raw):
        th = (u_gender >= scenario.model.p).astype(np.int64)
        theta[i, :n] = th
        male = th == MALE
        plain = np.sort(u_comp[:, nc:], axis=1)
        for col, dest in ((-1, top1), (-2, top2)):
            if plain.shape[1] >= -col:
                u = plain[:, col]
                dest[i, :n] = np.where(male, g_m.quantile(u), g_w.quantile(u))
        if nc:
            u = u_comp[:, :nc]
            clone_values[i, :n] = np.where(male[:, None], g_m.quantile(u), g_w.quantile(u))
    return _Draws(theta, top1, top2, clone_values, life)


def simulate(scenario: Scenario, policy: BiddingPolicy, seeds=None, strict: bool = True) -> EpisodeBatch:
    """Run a batch of coupled episodes.

    Args:
        scenario: market, constraint and protocol.
        policy: bidding rule of the focal advertiser (and of the extra
            restricted competitors, if any).
        seeds: explicit per-episode seeds; defaults to ``scenario.episode_seeds()``.
        strict: raise `ConstraintViolation` if any ledger invariant breaks.
    """
    constraint = scenario.constraint
    policy.check(constraint)
    seeds = scenario.episode_seeds() if seeds is None else np.atleast_1d(np.asarray(seeds, dtype=np.int64))
    # truthful clones bid their drawn values, exactly like plain competitors
    copies = scenario.clone_model == COPY
    nc = scenario.clones if copies or policy.variant != TRUTHFUL else 0
    d = _draw_batch(scenario, seeds, nc)
    R, T_max = d.theta.shape
    model = scenario.model
    values = policy.values
    if scenario.horizon == FIXED:
        weights = model.delta ** np.arange(T_max, dtype=float)
    else:
        weights = np.ones(T_max)
    alive = np.arange(T_max)[None, :] < d.lifespan[:, None]

    if policy.variant == TRUTHFUL and constraint.kind == NONE and nc == 0:
        return _simulate_truthful(scenario, policy, seeds, d, weights, alive)

    n_m = np.zeros(R, dtype=np.int64)
    n_w = np.zeros(R, dtype=np.int64)
    c_m = np.zeros((R, nc), dtype=np.int64)
    c_w = np.zeros((R, nc), dtype=np.int64)
    acc = {k: np.zeros(R) for k in ("util", "rev", "ob", "pay", "gross")}
    cnt = {k: np.zeros(R, dtype=np.int64) for k in ("wm", "ww", "pw", "part", "viol")}
    rows = np.arange(R)
    for t in range(T_max):
        live = alive[:, t]
        g = d.theta[:, t]
        fb = policy.bid_array(constraint, n_m, n_w, g)
        if nc:
            cb = policy.bid_array(constraint, c_m, c_w, g[:, None], values=None if copies else d.clone_values[:, t, :])
            bids = np.column_stack([fb, cb, d.top1[:, t], d.top2[:, t]])
            winner = np.argmax(bids, axis=1)
            best = bids[rows, winner]
            price = np.partition(bids, -2, axis=1)[:, -2]
        else:
            top1, top2 = d.top1[:, t], d.top2[:, t]
            focal_first = fb >= top1
            winner = np.where(focal_first, 0, 1)
            best = np.where(focal_first, fb, top1)
            price = np.where(focal_first, top1, np.maximum(fb, top2))
        sale = live & (best > 0)
        won = sale & (winner == 0)
        female = g == FEMALE
        v = values[g]
        w = weights[t]
        acc["util"] += np.where(won, w * (v - price), 0.0)
        acc["pay"] += np.where(won, w * price, 0.0)
        acc["gross"] += np.where(won, w * v, 0.0)
        acc["rev"] += np.where(sale, price, 0.0)
        part = live & (fb > 0)
        cnt["part"] += part
        pw = part & female
        cnt["pw"] += pw
        acc["ob"] += np.where(pw, np.maximum(fb - values[FEMALE], 0.0), 0.0)
        won_m = won & ~female
        won_w = won & female
        n_m += won_m
        n_w += won_w
        cnt["wm"] += won_m
        cnt["ww"] += won_w
        if constraint.kind != NONE:
            cnt["viol"] += won & ~constraint.satisfied(n_m, n_w)
        if nc:
            cwon = sale[:, None] & (winner[:, None] == np.arange(1, nc + 1)[None, :])
            c_m += cwon & (g[:, None] == MALE)
            c_w += cwon & (g[:, None] == FEMALE)
            if constraint.kind != NONE:
                cnt["viol"] += np.sum(cwon & ~constraint.satisfied(c_m, c_w), axis=1)

    batch = EpisodeBatch(
        policy=policy.name,
        seeds=seeds,
        total_utility=acc["util"],
        wins_m=cnt["wm"],
        wins_w=cnt["ww"],
        sum_overbid_w=acc["ob"],
        participations_w=cnt["pw"],
        participations=cnt["part"],
        exchange_revenue=acc["rev"],
        payments=acc["pay"],
        gross_value=acc["gross"],
        rounds=d.lifespan.copy(),
        violations=cnt["viol"],
        scenario_id=scenario.scenario_id,
    )
    if strict and batch.violations.any():
        bad = np.flatnonzero(batch.violations)
        raise ConstraintViolation(
            f"{int(batch.violations.sum())} constraint violations in episodes with seeds {seeds[bad].tolist()}"
        )
    return batch


def _running_total(x):
    # round-by-round order, so totals match the per-round loop bit for bit
    return np.cumsum(x, axis=1)[:, -1]


def _simulate_truthful(scenario, policy, seeds, d: _Draws, weights, alive) -> EpisodeBatch:
    values = policy.values
    fb = np.where(alive, values[d.theta], 0.0)
    won = alive & (fb >= d.top1) & (fb > 0)
    price = np.where(won, d.top1, np.maximum(fb, d.top2))
    sale = alive & ((fb > 0) | (d.top1 > 0))
    female = d.theta == FEMALE
    w = weights[None, :]
    pw = alive & female & (fb > 0)
    return EpisodeBatch(
        policy=policy.name,
        seeds=seeds,
        total_utility=_running_total(np.where(won, w * (fb - price), 0.0)),
        wins_m=np.sum(won & ~female, axis=1),
        wins_w=np.sum(won & female, axis=1),
        sum_overbid_w=np.zeros(len(seeds)),
        participations_w=np.sum(pw, axis=1),
        participations=np.sum(alive & (fb > 0), axis=1),
        exchange_revenue=_running_total(np.where(sale, price, 0.0)),
        payments=_running_total(np.where(won, w * price, 0.0)),
        gross_value=_running_total(np.where(won, w * fb, 0.0)),
        rounds=d.lifespan.copy(),
        violations=np.zeros(len(seeds), dtype=np.int64),
        scenario_id=scenario.scenario_id,
    )


def run_episode(scenario: Scenario, policy: BiddingPolicy, seed: int) -> SimulationResult:
    """Simulate a single episode from its seed."""
    return simulate(scenario, policy, seeds=[seed]).episode(0)


@dataclass
class RatioEstimate:
    """Ratio of two coupled means with its paired standard error."""

    ratio: float
    se: float
    numerator: np.ndarray = field(repr=False)
    denominator: np.ndarray = field(repr=False)

    @property
    def runs(self) -> int:
        return len(self.numerator)


def paired_se(a, b, scale: float) -> float:
    """Standard error of ``mean(a - b) / scale`` over paired episodes."""
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if diff.size < 2:
        return 0.0
    return float(np.std(diff, ddof=1) / math.sqrt(diff.size) / abs(scale))


def _ratio(num, den, what: str) -> RatioEstimate:
    m_den = float(np.mean(den))
    if m_den <= 0:
        raise InvalidInputError(f"mean unrestricted {what} is {m_den}; the ratio is undefined")
    return RatioEstimate(float(np.mean(num)) / m_den, paired_se(num, den, m_den), num, den)


def utility_ratio(scenario: Scenario, constrained_policy: BiddingPolicy, seed=None, baseline: EpisodeBatch | None = None):
    """Mean constrained utility over mean truthful-unrestricted utility.

    ``baseline`` lets callers reuse an unrestricted batch simulated with the
    same seeds (it does not depend on the constraint).
    """
    seeds = scenario.episode_seeds(seed)
    constrained = simulate(scenario, constrained_policy, seeds)
    if baseline is None:
        baseline = simulate(scenario.unrestricted(), BiddingPolicy.truthful(constrained_policy.v_m, constrained_policy.v_w), seeds)
    return _ratio(constrained.total_utility, baseline.total_utility, "utility")


def revenue_ratio(scenario: Scenario, policy: BiddingPolicy, seed=None, baseline: EpisodeBatch | None = None):
    """Mean exchange revenue with ``restricted_count`` constrained bidders over the all-truthful revenue."""
    seeds = scenario.episode_seeds(seed)
    truthful = BiddingPolicy.truthful(policy.v_m, policy.v_w)
    if scenario.restricted_count == 0:
        restricted = simulate(scenario.unrestricted(), truthful, seeds)
    else:
        restricted = simulate(scenario, policy, seeds)
    if baseline is None:
        baseline = simulate(scenario.unrestricted(), truthful, seeds)
    return _ratio(restricted.exchange_revenue, baseline.exchange_revenue, "revenue")


def average_overbid(results) -> float:
    """Total female overbid divided by the number of female auctions entered."""
    if isinstance(results, EpisodeBatch):
        total, n = float(results.sum_overbid_w.sum()), int(results.participations_w.sum())
    else:
        total = sum(r.sum_overbid_w for r in results)
        n = sum(r.participations_w for r in results)
    if n == 0:
        raise InvalidInputError("no female auctions were entered; the average overbid is undefined")
    return total / n


EPISODE_COLUMNS = (
    "scenario_id",
    "policy",
    "seed",
    "total_utility",
    "wins_m",
    "wins_w",
    "avg_overbid_w",
    "exchange_revenue",
    "violations",
)


def write_episode_csv(batches, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EPISODE_COLUMNS)
        for batch in batches:
            for r in batch.results():
                writer.writerow([
                    batch.scenario_id,
                    batch.policy,
                    r.seed,
                    repr(r.total_utility),
                    r.wins_m,
                    r.wins_w,
                    repr(r.avg_overbid_w),
                    repr(r.exchange_revenue),
                    r.violations,
                ])
