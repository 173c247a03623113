"""Bid logs in ``bucket,advertiser_id,keyword_id,bid`` CSV form.

Buckets are 15-minute periods: either an integer index or an ISO-8601
timestamp, which is converted to the index of its period since the Unix epoch.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from fairbid.distributions import EMPIRICAL, BidDistribution
from fairbid.errors import BidLogFormatError, InsufficientDataError

HEADER = ("bucket", "advertiser_id", "keyword_id", "bid")
BUCKET_SECONDS = 15 * 60
TWO_DAYS = 2 * 24 * 4  # buckets per model refresh window


@dataclass(frozen=True)
class BidRecord:
    bucket: int
    advertiser_id: str
    keyword_id: str
    bid: float


@dataclass
class RowError:
    line: int
    message: str
    text: str = ""


@dataclass(eq=False)
class BidLog:
    """Records grouped by keyword, then by bucket (ascending)."""

    _groups: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    @classmethod
    def from_records(cls, records) -> "BidLog":
        groups: dict = defaultdict(lambda: defaultdict(list))
        for r in records:
            _check_bid(r.bid)
            groups[r.keyword_id][int(r.bucket)].append((r.advertiser_id, float(r.bid)))
        return cls(_freeze(groups))

    def __len__(self):
        return sum(len(rows) for buckets in self._groups.values() for rows in buckets.values())

    def keywords(self) -> list[str]:
        return sorted(self._groups)

    def buckets(self, keyword: str) -> list[int]:
        return list(self._groups.get(keyword, {}))

    def bucket_bids(self, keyword: str, bucket: int) -> np.ndarray:
        rows = self._groups.get(keyword, {}).get(bucket, ())
        return np.array([b for _, b in rows], dtype=float)

    def bids(self, keyword: str, bucket_range=None) -> np.ndarray:
        """All bids of ``keyword`` in the half-open ``[start, stop)`` bucket range."""
        lo, hi = bucket_range if bucket_range is not None else (-math.inf, math.inf)
        out = [b for bucket, rows in self._groups.get(keyword, {}).items() if lo <= bucket < hi for _, b in rows]
        return np.array(out, dtype=float)

    def records(self):
        for kw in self.keywords():
            for bucket, rows in self._groups[kw].items():
                for adv, bid in rows:
                    yield BidRecord(bucket, adv, kw, bid)


def _freeze(groups) -> dict:
    return {kw: {b: list(buckets[b]) for b in sorted(buckets)} for kw, buckets in groups.items()}


def _check_bid(bid: float):
    if not math.isfinite(bid) or bid <= 0:
        raise ValueError(f"bid must be finite and positive, got {bid!r}")


def parse_bucket(text: str) -> int:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return int(stamp.timestamp() // BUCKET_SECONDS)


def parse_bid_log(stream, lenient: bool = True) -> BidLog:
    """Parse a bid log from a text or binary stream, a path-like or a string.

    Rows are read one at a time. Malformed rows are recorded in
    ``BidLog.errors`` with their 1-based line numbers and skipped; with
    ``lenient=False`` the first malformed row raises instead.

    Raises:
        BidLogFormatError: missing or wrong header, or a bad row when strict.
    """
    if isinstance(stream, (bytes, bytearray)):
        stream = io.StringIO(bytes(stream).decode("utf-8"))
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    elif isinstance(stream, io.BufferedIOBase) or "b" in getattr(stream, "mode", ""):
        stream = io.TextIOWrapper(stream, encoding="utf-8", newline="")
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(h.strip().lstrip("﻿") for h in header) != HEADER:
        raise BidLogFormatError(f"expected header {','.join(HEADER)!r}, got {header!r}")
    groups: dict = defaultdict(lambda: defaultdict(list))
    errors: list[RowError] = []
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        try:
            if len(row) != 4:
                raise ValueError(f"expected 4 fields, got {len(row)}")
            bucket = parse_bucket(row[0])
            bid = float(row[3])
            _check_bid(bid)
        except ValueError as exc:
            err = RowError(line, str(exc), ",".join(row))
            if not lenient:
                raise BidLogFormatError(f"line {line}: {exc}") from exc
            errors.append(err)
            continue
        groups[row[2].strip()][bucket].append((row[1].strip(), bid))
    return BidLog(_freeze(groups), errors)


def serialize(log: BidLog, stream) -> None:
    """Write ``log`` back as CSV, ordered by keyword, bucket and input order."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(HEADER)
    for r in log.records():
        writer.writerow((r.bucket, r.advertiser_id, r.keyword_id, repr(r.bid)))


def empirical_cdf_for(log: BidLog, keyword: str, bucket_range=None) -> BidDistribution:
    """Empirical distribution of a keyword's bids over ``[start, stop)`` buckets."""
    bids = log.bids(keyword, bucket_range)
    if bids.size < 2:
        raise InsufficientDataError(
            f"keyword {keyword!r} has {bids.size} bids in range {bucket_range}; need at least 2"
        )
    return BidDistribution.empirical(bids)


def stationarity_distance(d1: BidDistribution, d2: BidDistribution) -> float:
    """Two-sample Kolmogorov-Smirnov statistic between two empirical distributions."""
    if d1.kind != EMPIRICAL or d2.kind != EMPIRICAL:
        raise TypeError("stationarity_distance needs two empirical distributions")
    a, b = d1.samples, d2.samples
    points = np.concatenate([a, b])
    fa = np.searchsorted(a, points, side="right") / a.size
    fb = np.searchsorted(b, points, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def sample_auction_bids(log: BidLog, keyword: str, bucket: int, count: int, rng) -> np.ndarray:
    """``count`` bids drawn with replacement from one bucket's records."""
    if count < 1:
        raise ValueError("count must be >= 1")
    bids = log.bucket_bids(keyword, bucket)
    if bids.size == 0:
        raise InsufficientDataError(f"bucket {bucket} of keyword {keyword!r} is empty")
    return bids[rng.integers(0, bids.size, size=count)]


def generate_synthetic_log(
    stream,
    keywords: dict,
    n_buckets: int,
    records_per_bucket: int,
    n_advertisers: int = 100,
    seed: int = 0,
    start_bucket: int = 0,
) -> int:
    """Write a synthetic log whose bids are log-normal per keyword.

    Args:
        keywords: maps keyword id to ``(mu, sigma_sq)``.

    Returns:
        The number of records written.
    """
    rng = np.random.default_rng(seed)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(HEADER)
    written = 0
    for kw in sorted(keywords):
        mu, sigma_sq = keywords[kw]
        for bucket in range(start_bucket, start_bucket + n_buckets):
            bids = np.exp(mu + math.sqrt(sigma_sq) * rng.standard_normal(records_per_bucket))
            advertisers = rng.integers(0, n_advertisers, size=records_per_bucket)
            for adv, bid in zip(advertisers, bids):
                writer.writerow((bucket, f"a{adv}", kw, repr(float(bid))))
            written += records_per_bucket
    return written
