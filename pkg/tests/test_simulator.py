import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import table1_model
from fairbid import BidDistribution, BiddingPolicy, Constraint, MarketModel, solve_parity, solve_ratio
from fairbid.errors import ConfigError, InvalidInputError
from fairbid.simulator import (
    EPISODE_COLUMNS,
    GEOMETRIC,
    Scenario,
    average_overbid,
    fixed_horizon,
    revenue_ratio,
    run_auction,
    run_episode,
    simulate,
    utility_ratio,
    write_episode_csv,
)


class TestRunAuction:
    @pytest.mark.parametrize(
        "bids,expected",
        [([20, 21, 5], (1, 20.0)), ([22, 21, 5], (0, 21.0)), ([3, 3], (0, 3.0))],
    )
    def test_examples(self, bids, expected):
        assert run_auction(bids) == expected

    def test_single_bid_rejected(self):
        with pytest.raises(InvalidInputError):
            run_auction([1.0])

    def test_negative_bid_rejected(self):
        with pytest.raises(InvalidInputError):
            run_auction([1.0, -2.0])

    @given(st.lists(st.floats(0, 100), min_size=2, max_size=12))
    def test_price_is_second_order_statistic(self, bids):
        winner, price = run_auction(bids)
        assert bids[winner] == max(bids)
        assert price == sorted(bids)[-2]
        assert winner == bids.index(max(bids))


def test_fixed_horizon_tail():
    T = fixed_horizon(0.999, 0.086)
    assert 0.999**T * 0.086 < 1e-6 <= 0.999 ** (T - 1) * 0.086
    assert fixed_horizon(0.0, 1.0) == 1


@pytest.fixture(scope="module")
def parity_scenario():
    model = table1_model("expensive_female", p=0.5, delta=0.99)
    table = solve_parity(model, 2)
    scenario = Scenario(model, Constraint.parity(2), runs=6, seed=11)
    return model, table, scenario


def test_same_seed_same_result(parity_scenario):
    model, table, scenario = parity_scenario
    policy = BiddingPolicy.optimal(table, model.v_m, model.v_w)
    a, b = simulate(scenario, policy), simulate(scenario, policy)
    for name in ("total_utility", "wins_m", "wins_w", "exchange_revenue", "sum_overbid_w"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_run_episode_matches_batch_row(parity_scenario):
    model, table, scenario = parity_scenario
    policy = BiddingPolicy.optimal(table, model.v_m, model.v_w)
    batch = simulate(scenario, policy)
    seed = int(scenario.episode_seeds()[3])
    assert run_episode(scenario, policy, seed) == batch.episode(3)


def test_conservation(parity_scenario):
    model, table, scenario = parity_scenario
    for policy in (
        BiddingPolicy.optimal(table, model.v_m, model.v_w),
        BiddingPolicy.naive(model.v_m, model.v_w),
    ):
        batch = simulate(scenario, policy)
        np.testing.assert_allclose(batch.total_utility + batch.payments, batch.gross_value, rtol=1e-12)
        assert np.all(batch.violations == 0)


def test_truthful_fast_path_agrees_with_round_loop(parity_scenario):
    # a parity bound nobody can reach makes the loop replay the truthful run
    model, _, scenario = parity_scenario
    loose = Scenario(model, Constraint.parity(10**6), runs=6, seed=11)
    fast = simulate(scenario.unrestricted(), BiddingPolicy.truthful(model.v_m, model.v_w))
    slow = simulate(loose, BiddingPolicy.naive(model.v_m, model.v_w))
    np.testing.assert_array_equal(fast.total_utility, slow.total_utility)
    np.testing.assert_array_equal(fast.exchange_revenue, slow.exchange_revenue)


def test_all_male_slots_one_parity():
    model = table1_model("equal_price", p=1.0 - 1e-12, delta=0.99)
    scenario = Scenario(model, Constraint.parity(1), runs=3, T=2000)
    batch = simulate(scenario, BiddingPolicy.naive(model.v_m, model.v_w))
    assert np.all(batch.wins_m <= 1)


class TestLifespanOne:
    def test_single_round(self):
        model = table1_model("equal_price", delta=0.0)
        scenario = Scenario(model, Constraint.parity(1), horizon=GEOMETRIC, runs=20)
        batch = simulate(scenario, BiddingPolicy.truthful(model.v_m, model.v_w))
        assert np.all(batch.rounds == 1)

    def test_parity_changes_nothing(self):
        model = table1_model("equal_price", delta=0.0)
        table = solve_parity(model, 1)
        scenario = Scenario(model, Constraint.parity(1), horizon=GEOMETRIC, runs=50)
        free = simulate(scenario.unrestricted(), BiddingPolicy.truthful(model.v_m, model.v_w))
        bound = simulate(scenario, BiddingPolicy.optimal(table, model.v_m, model.v_w))
        np.testing.assert_array_equal(free.total_utility, bound.total_utility)


def test_zero_variance_competitors_closed_form():
    delta, v, c, T = 0.999, 0.1, 0.04, 10**4
    flat = BidDistribution.empirical([c, c])
    model = MarketModel(flat, flat, alpha=10, p=0.5, v_m=v, v_w=v, delta=delta)
    scenario = Scenario(model, runs=2, T=T)
    batch = simulate(scenario, BiddingPolicy.truthful(v, v))
    expected = (v - c) * (1 - delta**T) / (1 - delta)
    np.testing.assert_allclose(batch.total_utility, expected, rtol=1e-10)
    np.testing.assert_allclose(batch.exchange_revenue, c * T, rtol=1e-12)


class TestRatios:
    def test_no_constraint_gives_exactly_one(self, parity_scenario):
        model, _, scenario = parity_scenario
        est = utility_ratio(scenario.unrestricted(), BiddingPolicy.naive(model.v_m, model.v_w))
        assert est.ratio == 1.0 and est.se == 0.0

    def test_unreachable_bound_gives_exactly_one(self, parity_scenario):
        model, _, _ = parity_scenario
        scenario = Scenario(model, Constraint.parity(10**6), runs=4)
        assert utility_ratio(scenario, BiddingPolicy.naive(model.v_m, model.v_w)).ratio == 1.0

    def test_no_restricted_advertisers_keeps_revenue(self, parity_scenario):
        model, table, _ = parity_scenario
        scenario = Scenario(model, Constraint.parity(2), restricted_count=0, runs=4)
        policy = BiddingPolicy.optimal(table, model.v_m, model.v_w)
        assert revenue_ratio(scenario, policy).ratio == 1.0

    def test_constraint_costs_utility(self, parity_scenario):
        model, table, scenario = parity_scenario
        est = utility_ratio(scenario, BiddingPolicy.optimal(table, model.v_m, model.v_w))
        assert 0 < est.ratio < 1 and est.se > 0 and est.runs == 6

    def test_undefined_ratio(self):
        model = table1_model("equal_price", delta=0.9)
        poor = MarketModel(model.g_m, model.g_w, 10, 0.5, 1e-9, 1e-9, 0.9)
        with pytest.raises(InvalidInputError):
            utility_ratio(Scenario(poor, Constraint.parity(1), runs=2), BiddingPolicy.naive(1e-9, 1e-9))


class TestOverbid:
    def test_truthful_never_overbids(self, parity_scenario):
        model, _, scenario = parity_scenario
        assert average_overbid(simulate(scenario.unrestricted(), BiddingPolicy.truthful(model.v_m, model.v_w))) == 0.0

    def test_myopic_optimal_never_overbids(self):
        model = table1_model("expensive_female", delta=0.0)
        table = solve_parity(model, 2)
        scenario = Scenario(model, Constraint.parity(2), runs=3, T=500)
        batch = simulate(scenario, BiddingPolicy.optimal(table, model.v_m, model.v_w))
        assert average_overbid(batch) == 0.0
        assert average_overbid(batch.results()) == 0.0

    def test_undefined_without_female_auctions(self):
        model = table1_model("equal_price", p=1.0 - 1e-12, delta=0.9)
        batch = simulate(Scenario(model, runs=2, T=50), BiddingPolicy.truthful(model.v_m, model.v_w))
        with pytest.raises(InvalidInputError):
            average_overbid(batch)


@pytest.mark.parametrize("clone_model", ["copy", "drawn"])
def test_restricted_competitors_respect_their_ledgers(clone_model):
    model = table1_model("expensive_female", p=0.3, delta=0.99)
    table = solve_ratio(model, 0.8, 2, 40)
    scenario = Scenario(model, Constraint.ratio(0.8, 2, 0.3), restricted_count=4, runs=4, clone_model=clone_model)
    batch = simulate(scenario, BiddingPolicy.optimal(table, model.v_m, model.v_w))
    assert np.all(batch.violations == 0)
    assert revenue_ratio(scenario, BiddingPolicy.optimal(table, model.v_m, model.v_w)).ratio > 0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_coupling_shares_slots_and_competitor_bids(seed):
    """Two focal policies see the same slots: the truthful run's wins under any
    bound must dominate a constrained run's wins slot by slot in total."""
    model = table1_model("equal_price", p=0.5, delta=0.99)
    scenario = Scenario(model, Constraint.parity(1), runs=1, T=300)
    free = simulate(scenario.unrestricted(), BiddingPolicy.truthful(model.v_m, model.v_w), seeds=[seed])
    naive = simulate(scenario, BiddingPolicy.naive(model.v_m, model.v_w), seeds=[seed])
    assert naive.wins_m[0] <= free.wins_m[0] and naive.wins_w[0] <= free.wins_w[0]
    again = simulate(scenario.unrestricted(), BiddingPolicy.naive(model.v_m, model.v_w), seeds=[seed])
    assert again.episode(0).total_utility == free.episode(0).total_utility


def test_scenario_validation():
    model = table1_model("equal_price")
    with pytest.raises(ConfigError):
        Scenario(model, restricted_count=11)
    with pytest.raises(ConfigError):
        Scenario(model, runs=0)
    with pytest.raises(ConfigError):
        Scenario(model, horizon="forever")


def test_episode_csv(tmp_path, parity_scenario):
    model, table, scenario = parity_scenario
    batch = simulate(scenario, BiddingPolicy.naive(model.v_m, model.v_w))
    path = tmp_path / "episodes.csv"
    write_episode_csv([batch], path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == EPISODE_COLUMNS
    assert len(rows) == 1 + len(batch)
    assert all(row[-1] == "0" for row in rows[1:])
    assert math.isclose(float(rows[1][3]), batch.total_utility[0], rel_tol=1e-15)
