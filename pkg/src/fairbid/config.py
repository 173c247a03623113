"""TOML experiment configs with dotted sections and command-line overrides."""

from __future__ import annotations

import copy
import math
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from fairbid.datalog import empirical_cdf_for, parse_bid_log
from fairbid.distributions import BidDistribution, MarketModel
from fairbid.errors import ConfigError

SIGMA_SQ = 0.7

# log-normal locations: competitors (others) and the focal advertiser, per gender
PRESETS = {
    "equal_price_female_valuable": {"others_mu_m": -2.8, "others_mu_w": -2.8, "focal_mu_m": -3.5, "focal_mu_w": -2.4},
    "expensive_female_equal_value": {"others_mu_m": -3.5, "others_mu_w": -2.4, "focal_mu_m": -2.8, "focal_mu_w": -2.8},
}

GRID_KEYS = ("p", "K", "r", "mu", "male_value_ratio", "lifespan", "delta", "restricted_count")


class Config:
    """A loaded config: nested dicts plus the directory relative paths resolve against."""

    def __init__(self, data: dict, base_dir: Path = Path(".")):
        self.data = data
        self.base_dir = Path(base_dir)

    @classmethod
    def load(cls, path, overrides=()) -> "Config":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path} not found") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        cfg = cls(data, path.parent)
        for item in overrides:
            cfg.set(item)
        return cfg

    @classmethod
    def from_text(cls, text: str, base_dir=".") -> "Config":
        try:
            return cls(tomllib.loads(text), Path(base_dir))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(str(exc)) from exc

    def set(self, item: str) -> None:
        """Apply a ``section.key=value`` override; the value is parsed as TOML when possible."""
        key, sep, raw = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        try:
            value = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw
        *sections, leaf = key.strip().split(".")
        node = self.data
        for s in sections:
            node = node.setdefault(s, {})
        node[leaf] = value

    def section(self, name: str) -> dict:
        return copy.deepcopy(self.data.get(name, {}))

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p


def _num(section: dict, key: str, default=None, where: str = ""):
    value = section.get(key, default)
    if value is None:
        raise ConfigError(f"missing {where}{key}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}{key} must be a number, got {value!r}")
    return value


class MarketSpec:
    """Competitor distributions and focal values described by the ``[market]`` section."""

    def __init__(self, cfg: Config):
        m = cfg.section("market")
        scenario = m.get("scenario", "custom")
        if scenario in PRESETS:
            m = {**PRESETS[scenario], **m}
        elif scenario != "custom" and "log" not in m:
            raise ConfigError(f"unknown market scenario {scenario!r}")
        self.scenario = scenario
        self.alpha = int(_num(m, "alpha", 10, "market."))
        self.delta = float(_num(m, "delta", 0.999, "market."))
        self.p = m.get("p")
        self.sigma_sq = float(_num(m, "sigma_sq", SIGMA_SQ, "market."))
        if "log" in m:
            path = cfg.resolve(m["log"])
            if not path.exists():
                raise ConfigError(f"bid log {path} not found")
            with open(path, "rb") as fh:
                log = parse_bid_log(fh)
            window = m.get("window", [0, 192])
            dist = empirical_cdf_for(log, str(m.get("keyword", "2")), tuple(window))
            self.g_m = self.g_w = dist
            value = float(m.get("value", dist.mean()))
            self.base_v_m = self.base_v_w = value
            self.others_v_m = dist.mean()
        else:
            where = "market."
            self.g_m = BidDistribution.lognormal(_num(m, "others_mu_m", where=where), self.sigma_sq)
            self.g_w = BidDistribution.lognormal(_num(m, "others_mu_w", where=where), self.sigma_sq)
            half = self.sigma_sq / 2.0
            self.base_v_m = math.exp(_num(m, "focal_mu_m", where=where) + half)
            self.base_v_w = math.exp(_num(m, "focal_mu_w", where=where) + half)
            self.others_v_m = self.g_m.mean()

    def model(self, p: float, delta: float | None = None, male_value_ratio: float | None = None) -> MarketModel:
        v_m = self.base_v_m if male_value_ratio is None else male_value_ratio * self.others_v_m
        return MarketModel(
            g_m=self.g_m,
            g_w=self.g_w,
            alpha=self.alpha,
            p=p,
            v_m=v_m,
            v_w=self.base_v_w,
            delta=self.delta if delta is None else delta,
        )


def delta_for_lifespan(lifespan: float) -> float:
    """Continuation probability whose geometric lifespan has the given mean."""
    if lifespan < 1:
        raise ConfigError("expected lifespan must be >= 1")
    return 1.0 - 1.0 / lifespan
