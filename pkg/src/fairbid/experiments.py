"""Grid sweeps behind the ``simulate`` command.

Every grid point simulates one truthful unrestricted baseline and one batch
per requested policy, all from the same episode seeds, and reports utility
and revenue ratios against the baseline plus the average female overbid.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from fairbid._bellman import SolverConfig
from fairbid.config import GRID_KEYS, Config, MarketSpec, delta_for_lifespan
from fairbid.errors import ConfigError
from fairbid.parity import solve_parity
from fairbid.ratio import solve_ratio
from fairbid.simulator import COPY, FIXED, Scenario, paired_se, simulate
from fairbid.strategies import NAIVE, NONE, OPTIMAL, PARITY, RATIO, TRUTHFUL, BiddingPolicy, Constraint

RESULT_COLUMNS = (
    "policy",
    "utility_ratio",
    "utility_se",
    "revenue_ratio",
    "revenue_se",
    "avg_overbid_w",
    "solver_iterations",
)


@dataclass
class Point:
    """Fully resolved parameters of one grid point."""

    p: float
    kind: str
    K: float
    r: float
    mu: int
    delta: float
    male_value_ratio: float | None
    restricted_count: int

    def constraint(self) -> Constraint:
        if self.kind == PARITY:
            return Constraint.parity(self.K)
        if self.kind == RATIO:
            return Constraint.ratio(self.r, self.K, self.p)
        return Constraint.none()


class Experiment:
    def __init__(self, cfg: Config, seed: int | None = None):
        self.cfg = cfg
        self.market = MarketSpec(cfg)
        exp = cfg.section("experiment")
        self.name = exp.get("name", "experiment")
        self.policies = list(exp.get("policies", [OPTIMAL]))
        for pol in self.policies:
            if pol not in (TRUTHFUL, NAIVE, OPTIMAL):
                raise ConfigError(f"unknown policy {pol!r}")
        self.constraint = cfg.section("constraint")
        self.grid = cfg.section("grid")
        for key, values in self.grid.items():
            if key not in GRID_KEYS:
                raise ConfigError(f"grid.{key} is not a sweepable parameter")
            if not isinstance(values, list) or not values:
                raise ConfigError(f"grid.{key} must be a non-empty list")
        solver = cfg.section("solver")
        self.solver_cfg = SolverConfig(
            epsilon=float(solver.get("epsilon", 1e-3)),
            quad_step=solver.get("quad_step"),
            max_iterations=int(solver.get("max_iterations", 100_000)),
            b_max=solver.get("b_max"),
        )
        run = cfg.section("run")
        self.runs = int(run.get("runs", 100))
        self.seed = int(run.get("seed", 0) if seed is None else seed)
        self.horizon = run.get("horizon", FIXED)
        self.T = run.get("T")
        self.restricted_count = int(run.get("restricted_count", 1))
        self.clone_model = run.get("clone_model", COPY)
        if self.runs < 1:
            raise ConfigError("run.runs must be >= 1")

    def points(self) -> list[dict]:
        keys = list(self.grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]

    def resolve(self, overrides: dict) -> Point:
        c = {**self.constraint, **{k: v for k, v in overrides.items() if k in ("K", "r", "mu")}}
        p = overrides.get("p", self.market.p)
        if p is None:
            raise ConfigError("p must be set in [market] or [grid]")
        if "lifespan" in overrides:
            delta = delta_for_lifespan(float(overrides["lifespan"]))
        else:
            delta = float(overrides.get("delta", self.market.delta))
        return Point(
            p=float(p),
            kind=c.get("kind", NONE),
            K=c.get("K", 0),
            r=float(c.get("r", 1.0)),
            mu=int(c.get("mu", 100)),
            delta=delta,
            male_value_ratio=overrides.get("male_value_ratio"),
            restricted_count=int(overrides.get("restricted_count", self.restricted_count)),
        )

    def solve(self, point: Point):
        model = self.market.model(point.p, point.delta, point.male_value_ratio)
        if point.kind == PARITY:
            return model, solve_parity(model, int(point.K), self.solver_cfg)
        if point.kind == RATIO:
            return model, solve_ratio(model, point.r, point.K, point.mu, self.solver_cfg)
        return model, None

    def scenario(self, point: Point, model) -> Scenario:
        return Scenario(
            model,
            point.constraint(),
            restricted_count=point.restricted_count,
            horizon=self.horizon,
            T=self.T,
            runs=self.runs,
            seed=self.seed,
            scenario_id=self.name,
            clone_model=self.clone_model,
        )

    def simulate_point(self, overrides: dict):
        """Solve and simulate one grid point.

        Returns ``(point, table, baseline, batches)`` where ``baseline`` is the
        truthful unrestricted batch and ``batches`` maps policy names to
        batches, all from the same episode seeds.
        """
        point = self.resolve(overrides)
        if OPTIMAL in self.policies:
            model, table = self.solve(point)
        else:
            model, table = self.market.model(point.p, point.delta, point.male_value_ratio), None
        scenario = self.scenario(point, model)
        truthful = BiddingPolicy.truthful(model.v_m, model.v_w)
        baseline = simulate(scenario.unrestricted(), truthful)
        batches = {}
        for name in self.policies:
            if name == OPTIMAL:
                batches[name] = simulate(scenario, BiddingPolicy.optimal(table, model.v_m, model.v_w))
            elif name == NAIVE:
                batches[name] = simulate(scenario, BiddingPolicy.naive(model.v_m, model.v_w))
            else:
                batches[name] = simulate(scenario.unrestricted(), truthful)
        return point, table, baseline, batches

    def run_point(self, overrides: dict) -> list[dict]:
        _, table, baseline, batches = self.simulate_point(overrides)
        rows = []
        for name, batch in batches.items():
            iterations = table.iterations if table is not None and name == OPTIMAL else 0
            rows.append({**overrides, **_ratios(batch, baseline), "policy": name, "solver_iterations": iterations})
        return rows

    def run(self, threads: int = 1) -> list[dict]:
        points = self.points()
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                chunks = list(pool.map(self.run_point, points))
        else:
            chunks = [self.run_point(pt) for pt in points]
        rows = [row for chunk in chunks for row in chunk]
        keys = list(self.grid)
        rows.sort(key=lambda r: tuple(r[k] for k in keys) + (r["policy"],))
        return rows

    def columns(self) -> list[str]:
        return list(self.grid) + list(RESULT_COLUMNS)


def _ratios(batch, baseline) -> dict:
    u_den = float(np.mean(baseline.total_utility))
    r_den = float(np.mean(baseline.exchange_revenue))
    n_w = int(batch.participations_w.sum())
    return {
        "utility_ratio": float(np.mean(batch.total_utility)) / u_den if u_den > 0 else math.nan,
        "utility_se": paired_se(batch.total_utility, baseline.total_utility, u_den) if u_den > 0 else math.nan,
        "revenue_ratio": float(np.mean(batch.exchange_revenue)) / r_den if r_den > 0 else math.nan,
        "revenue_se": paired_se(batch.exchange_revenue, baseline.exchange_revenue, r_den) if r_den > 0 else math.nan,
        "avg_overbid_w": float(batch.sum_overbid_w.sum()) / n_w if n_w else math.nan,
    }


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def write_rows(rows, columns, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
