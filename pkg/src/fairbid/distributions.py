"""Competing-bid distributions, win probabilities and expected second-price cost.

Every solver update consumes two quantities per slot type:

* the win probability ``q(x) = G(x) ** (alpha - 1)`` for a bid ``x`` against
  ``alpha - 1`` i.i.d. competitors with bid CDF ``G``;
* the expected payment ``c(b) = q(b) * b - integral_0^b q(u) du``.

`WinCurve` caches the running integral of ``q`` on a uniform grid so that the
value-iteration sweeps can evaluate ``c`` for thousands of states cheaply.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from fairbid.errors import ConfigError, InvalidInputError

LOGNORMAL = "lognormal"
EMPIRICAL = "empirical"

MALE, FEMALE = 0, 1
GROUPS = ("m", "w")


def group_index(theta) -> int:
    """Map ``'m'``/``'w'`` (or 0/1) to the column index used in tables."""
    if theta in ("m", MALE):
        return MALE
    if theta in ("w", FEMALE):
        return FEMALE
    raise InvalidInputError(f"unknown group {theta!r}; expected 'm' or 'w'")


@dataclass(frozen=True, eq=False)
class BidDistribution:
    """CDF of one competing advertiser's bid for a single slot type.

    Use the `lognormal` and `empirical` constructors rather than building the
    dataclass directly. Empirical CDFs interpolate linearly between order
    statistics (``F(x_(1)) = 0``, ``F(x_(n)) = 1``) so the win probability
    stays continuous.
    """

    kind: str
    mu: float | None = None
    sigma_sq: float | None = None
    samples: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind == LOGNORMAL:
            if self.mu is None or not math.isfinite(self.mu):
                raise InvalidInputError("log-normal mu must be finite")
            if self.sigma_sq is None or not (self.sigma_sq > 0 and math.isfinite(self.sigma_sq)):
                raise InvalidInputError("log-normal sigma_sq must be positive")
        elif self.kind == EMPIRICAL:
            s = np.asarray(self.samples, dtype=float)
            if s.ndim != 1 or s.size < 2:
                raise InvalidInputError("empirical distribution needs at least 2 samples")
            if not np.all(np.isfinite(s)) or np.any(s < 0):
                raise InvalidInputError("empirical samples must be finite and >= 0")
            s = np.sort(s)
            s.setflags(write=False)
            object.__setattr__(self, "samples", s)
        else:
            raise InvalidInputError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def lognormal(cls, mu: float, sigma_sq: float) -> "BidDistribution":
        return cls(LOGNORMAL, mu=float(mu), sigma_sq=float(sigma_sq))

    @classmethod
    def empirical(cls, samples) -> "BidDistribution":
        return cls(EMPIRICAL, samples=np.asarray(samples, dtype=float))

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma_sq)

    def cdf(self, x):
        """Evaluate ``G(x)``; accepts scalars or arrays."""
        xa = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(xa)):
            raise InvalidInputError("cdf argument must be finite")
        if self.kind == LOGNORMAL:
            with np.errstate(divide="ignore"):
                z = (np.log(np.maximum(xa, 0.0)) - self.mu) / self.sigma
            out = special.ndtr(z)
        else:
            n = self.samples.size
            out = np.interp(xa, self.samples, np.linspace(0.0, 1.0, n), left=0.0, right=1.0)
        return float(out) if np.ndim(out) == 0 else out

    def quantile(self, u):
        """Map uniforms in [0, 1) to bids.

        Log-normal draws use the inverse CDF. Empirical draws pick a stored
        sample uniformly, so the map is monotone in ``u`` either way.
        """
        ua = np.asarray(u, dtype=float)
        if self.kind == LOGNORMAL:
            return np.exp(self.mu + self.sigma * special.ndtri(ua))
        n = self.samples.size
        idx = np.minimum((ua * n).astype(np.int64), n - 1)
        return self.samples[idx]

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == LOGNORMAL:
            return np.exp(self.mu + self.sigma * rng.standard_normal(size))
        return self.samples[rng.integers(0, self.samples.size, size=size)]

    def mean(self) -> float:
        if self.kind == LOGNORMAL:
            return math.exp(self.mu + self.sigma_sq / 2.0)
        return float(self.samples.mean())

    def median(self) -> float:
        if self.kind == LOGNORMAL:
            return math.exp(self.mu)
        return float(np.median(self.samples))

    def upper_bound(self) -> float:
        """Default bid-domain bound: 99.9th percentile, or the largest sample."""
        if self.kind == LOGNORMAL:
            return float(np.exp(self.mu + self.sigma * special.ndtri(0.999)))
        return float(self.samples[-1])

    def fingerprint(self) -> str:
        h = hashlib.sha256(self.kind.encode())
        if self.kind == LOGNORMAL:
            h.update(f"{self.mu!r},{self.sigma_sq!r}".encode())
        else:
            h.update(self.samples.tobytes())
        return h.hexdigest()[:16]


def cdf(dist: BidDistribution, x):
    return dist.cdf(x)


def win_probability(dist: BidDistribution, alpha: int, x):
    """``q(x) = G(x) ** (alpha - 1)``."""
    if alpha < 2:
        raise InvalidInputError("alpha must be at least 2")
    return np.power(dist.cdf(x), alpha - 1)


def sample(dist: BidDistribution, rng: np.random.Generator, size=None):
    return dist.sample(rng, size)


class WinCurve:
    """Win probability and its running integral for one slot type.

    The integral of ``q`` is tabulated with the composite trapezoid rule on
    the grid ``0, h, 2h, ...``; a query between grid points adds the exact
    trapezoid of the final partial cell. The table grows on demand when a
    query exceeds its current end.
    """

    def __init__(self, dist: BidDistribution, alpha: int, quad_step: float, upper: float = 0.0):
        if not quad_step > 0:
            raise ConfigError("quad_step must be positive")
        if alpha < 2:
            raise InvalidInputError("alpha must be at least 2")
        self.dist = dist
        self.alpha = int(alpha)
        self.h = float(quad_step)
        self._nodes = np.zeros(1)
        self._q = np.asarray([self.q(0.0)], dtype=float)
        self._cum = np.zeros(1)
        self._extend(upper)

    def q(self, x):
        return np.power(self.dist.cdf(x), self.alpha - 1)

    def _extend(self, upper: float):
        n_cells = int(math.ceil(upper / self.h)) + 1
        if n_cells + 1 <= self._nodes.size:
            return
        n_cells = max(n_cells, 2 * (self._nodes.size - 1))
        nodes = np.arange(n_cells + 1) * self.h
        qv = self.q(nodes)
        cum = np.concatenate(([0.0], np.cumsum(0.5 * self.h * (qv[1:] + qv[:-1]))))
        self._nodes, self._q, self._cum = nodes, qv, cum

    def integral(self, b):
        """Trapezoid approximation of ``integral_0^b q(u) du``."""
        out = self.q_and_integral(b)[1]
        return float(out) if np.ndim(out) == 0 else out

    def q_and_integral(self, b):
        """``q(b)`` and its integral from 0, sharing one CDF evaluation."""
        ba = np.asarray(b, dtype=float)
        if np.any(ba < 0):
            raise InvalidInputError("bids must be non-negative")
        top = float(np.max(ba)) if ba.size else 0.0
        if top >= self._nodes[-1]:
            self._extend(top + self.h)
        j = np.minimum((ba / self.h).astype(np.int64), self._nodes.size - 2)
        qb = self.q(ba)
        return qb, self._cum[j] + 0.5 * (ba - self._nodes[j]) * (self._q[j] + qb)

    def cost(self, b):
        """Expected payment ``c(b) = q(b) b - integral_0^b q``."""
        ba = np.asarray(b, dtype=float)
        out = self.q(ba) * ba - self.integral(ba)
        # the trapezoid sum never exceeds q(b) b, so negatives are rounding only
        out = np.clip(out, 0.0, None)
        return float(out) if np.ndim(out) == 0 else out


def expected_cost(dist: BidDistribution, alpha: int, b: float, quad_step: float) -> float:
    """Expected second-price payment of bid ``b`` against ``alpha - 1`` competitors."""
    if not quad_step > 0:
        raise ConfigError("quad_step must be positive")
    if b < 0:
        raise InvalidInputError("bid must be non-negative")
    return WinCurve(dist, alpha, quad_step, upper=b).cost(b)


@dataclass(frozen=True, eq=False)
class MarketModel:
    """What the focal advertiser estimates about its market.

    Attributes:
        g_m, g_w: competing-bid distributions for male and female slots.
        alpha: number of advertisers per auction, the focal one included.
        p: probability that a slot is male.
        v_m, v_w: expected slot values to the focal advertiser.
        delta: per-round continuation probability (discount factor).
    """

    g_m: BidDistribution
    g_w: BidDistribution
    alpha: int
    p: float
    v_m: float
    v_w: float
    delta: float

    def __post_init__(self):
        if int(self.alpha) != self.alpha or self.alpha < 2:
            raise ConfigError("alpha must be an integer >= 2")
        object.__setattr__(self, "alpha", int(self.alpha))
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError("p must lie in [0, 1]")
        if not 0.0 <= self.delta < 1.0:
            raise ConfigError("delta must lie in [0, 1)")
        if not (self.v_m >= 0 and self.v_w >= 0 and math.isfinite(self.v_m) and math.isfinite(self.v_w)):
            raise ConfigError("slot values must be finite and non-negative")

    def dist(self, theta) -> BidDistribution:
        return (self.g_m, self.g_w)[group_index(theta)]

    def value(self, theta) -> float:
        return (self.v_m, self.v_w)[group_index(theta)]

    @property
    def values(self) -> np.ndarray:
        return np.array([self.v_m, self.v_w])

    def default_b_max(self) -> float:
        return max(self.g_m.upper_bound(), self.g_w.upper_bound())

    def fingerprint(self) -> str:
        parts = [self.g_m.fingerprint(), self.g_w.fingerprint()]
        parts += [repr(x) for x in (self.alpha, self.p, self.v_m, self.v_w, self.delta)]
        return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]
