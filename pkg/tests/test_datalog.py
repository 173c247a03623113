import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fairbid import BidDistribution
from fairbid.datalog import (
    TWO_DAYS,
    BidLog,
    BidRecord,
    empirical_cdf_for,
    generate_synthetic_log,
    parse_bid_log,
    parse_bucket,
    sample_auction_bids,
    serialize,
    stationarity_distance,
)
from fairbid.errors import BidLogFormatError, InsufficientDataError

HEADER = "bucket,advertiser_id,keyword_id,bid\n"


class TestParse:
    def test_header_only(self):
        log = parse_bid_log(HEADER)
        assert len(log) == 0 and log.errors == []

    def test_single_row(self):
        log = parse_bid_log(HEADER + "3,a7,kw2,0.41\n")
        assert list(log.records()) == [BidRecord(3, "a7", "kw2", 0.41)]

    def test_bytes_and_binary_stream(self):
        raw = (HEADER + "3,a7,kw2,0.41\n").encode()
        assert len(parse_bid_log(raw)) == 1
        assert len(parse_bid_log(io.BytesIO(raw))) == 1

    def test_negative_bid_is_a_row_error(self):
        log = parse_bid_log(HEADER + "3,a7,kw2,-1\n4,a1,kw2,0.2\n")
        assert len(log) == 1
        assert [e.line for e in log.errors] == [2]

    def test_non_numeric_bid(self):
        log = parse_bid_log(HEADER + "3,a7,kw2,lots\n")
        assert len(log) == 0 and "lots" in log.errors[0].text

    def test_wrong_field_count(self):
        assert len(parse_bid_log(HEADER + "3,a7,0.4\n").errors) == 1

    def test_strict_mode_raises(self):
        with pytest.raises(BidLogFormatError, match="line 2"):
            parse_bid_log(HEADER + "3,a7,kw2,nan\n", lenient=False)

    @pytest.mark.parametrize("text", ["", "bucket,bid\n1,2\n", "3,a7,kw2,0.41\n"])
    def test_missing_header(self, text):
        with pytest.raises(BidLogFormatError):
            parse_bid_log(text)

    def test_buckets_sorted(self):
        log = parse_bid_log(HEADER + "9,a,k,1\n2,a,k,1\n5,a,k,1\n")
        assert log.buckets("k") == [2, 5, 9]

    def test_iso_bucket(self):
        assert parse_bucket("1970-01-01T00:30:00Z") == 2
        assert parse_bucket("1970-01-01T00:44:59") == 2
        assert parse_bucket(" 17 ") == 17


def _log_text(rows):
    return HEADER + "".join(f"{b},{a},{k},{bid!r}\n" for b, a, k, bid in rows)


rows_strategy = st.lists(
    st.tuples(
        st.integers(0, 50),
        st.sampled_from(["a1", "a2", "a3"]),
        st.sampled_from(["k1", "k2"]),
        st.floats(1e-6, 1e3, allow_nan=False),
    ),
    max_size=40,
)


@given(rows_strategy)
def test_round_trip(rows):
    log = parse_bid_log(_log_text(rows))
    out = io.StringIO()
    serialize(log, out)
    again = parse_bid_log(out.getvalue())
    assert sorted(again.records(), key=repr) == sorted(log.records(), key=repr)
    assert sorted((b, a, k, bid) for b, a, k, bid in rows) == sorted(
        (r.bucket, r.advertiser_id, r.keyword_id, r.bid) for r in log.records()
    )


@given(rows_strategy.filter(lambda rs: sum(r[2] == "k1" for r in rs) >= 2), st.randoms())
def test_empirical_cdf_ignores_record_order(rows, rnd):
    shuffled = list(rows)
    rnd.shuffle(shuffled)
    a = empirical_cdf_for(parse_bid_log(_log_text(rows)), "k1")
    b = empirical_cdf_for(parse_bid_log(_log_text(shuffled)), "k1")
    np.testing.assert_array_equal(a.samples, b.samples)


class TestEmpiricalCdf:
    def test_two_records(self):
        log = BidLog.from_records([BidRecord(0, "a", "k", 1.0), BidRecord(1, "b", "k", 3.0)])
        d = empirical_cdf_for(log, "k")
        np.testing.assert_array_equal(d.samples, [1.0, 3.0])

    def test_range_is_half_open(self):
        log = BidLog.from_records([BidRecord(b, "a", "k", float(b + 1)) for b in range(5)])
        np.testing.assert_array_equal(empirical_cdf_for(log, "k", (1, 3)).samples, [2.0, 3.0])

    def test_empty_range(self):
        log = BidLog.from_records([BidRecord(0, "a", "k", 1.0)])
        with pytest.raises(InsufficientDataError):
            empirical_cdf_for(log, "k", (5, 10))

    def test_synthetic_median(self):
        buf = io.StringIO()
        generate_synthetic_log(buf, {"2": (-2.8, 0.7)}, n_buckets=TWO_DAYS, records_per_bucket=25, seed=4)
        d = empirical_cdf_for(parse_bid_log(buf.getvalue()), "2", (0, TWO_DAYS))
        assert abs(np.median(d.samples) / math.exp(-2.8) - 1) < 0.02


class TestStationarity:
    def test_identical(self):
        d = BidDistribution.empirical([1.0, 2.0, 3.0])
        assert stationarity_distance(d, d) == 0.0

    def test_disjoint(self):
        a = BidDistribution.empirical([0.0, 1.0])
        b = BidDistribution.empirical([2.0, 3.0])
        assert stationarity_distance(a, b) == 1.0

    def test_parametric_rejected(self):
        with pytest.raises(TypeError):
            stationarity_distance(BidDistribution.lognormal(-2.8, 0.7), BidDistribution.empirical([1.0, 2.0]))

    @settings(max_examples=50)
    @given(
        st.lists(st.floats(0, 10, allow_nan=False), min_size=2, max_size=40),
        st.lists(st.floats(0, 10, allow_nan=False), min_size=2, max_size=40),
    )
    def test_matches_scipy_and_is_symmetric(self, xs, ys):
        a, b = BidDistribution.empirical(xs), BidDistribution.empirical(ys)
        d = stationarity_distance(a, b)
        assert d == stationarity_distance(b, a)
        assert 0.0 <= d <= 1.0
        assert d == pytest.approx(stats.ks_2samp(xs, ys, method="asymp").statistic, abs=1e-12)


class TestSampleAuctionBids:
    @pytest.fixture
    def log(self):
        return BidLog.from_records(
            [BidRecord(0, "a", "k", 0.5)] + [BidRecord(1, f"a{i}", "k", 0.1 * (i + 1)) for i in range(4)]
        )

    def test_single_record_repeats(self, log, rng):
        np.testing.assert_array_equal(sample_auction_bids(log, "k", 0, 3, rng), [0.5, 0.5, 0.5])

    def test_count_and_membership(self, log, rng):
        draws = sample_auction_bids(log, "k", 1, 9, rng)
        assert draws.shape == (9,)
        assert set(draws) <= set(log.bucket_bids("k", 1))

    def test_seeded(self, log):
        a = sample_auction_bids(log, "k", 1, 20, np.random.default_rng(3))
        b = sample_auction_bids(log, "k", 1, 20, np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)

    def test_empty_bucket(self, log, rng):
        with pytest.raises(InsufficientDataError):
            sample_auction_bids(log, "k", 7, 1, rng)


def test_generator_row_count():
    buf = io.StringIO()
    n = generate_synthetic_log(buf, {"a": (-2.8, 0.7), "b": (-3.5, 0.7)}, n_buckets=4, records_per_bucket=3)
    assert n == 24
    assert len(parse_bid_log(buf.getvalue())) == 24
