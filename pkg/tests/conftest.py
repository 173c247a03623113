import math
from pathlib import Path

import numpy as np
import pytest

from fairbid import BidDistribution, MarketModel

ROOT = Path(__file__).resolve().parent.parent
FIGURES = ROOT / "figures"
SIGMA_SQ = 0.7

ACCEPTANCE_LINES: list[str] = []


def lognormal_mean(mu, sigma_sq=SIGMA_SQ):
    return math.exp(mu + sigma_sq / 2)


def table1_model(name: str, p: float = 0.5, delta: float = 0.999, alpha: int = 10) -> MarketModel:
    others, focal = {
        "equal_price": ((-2.8, -2.8), (-3.5, -2.4)),
        "expensive_female": ((-3.5, -2.4), (-2.8, -2.8)),
    }[name]
    return MarketModel(
        g_m=BidDistribution.lognormal(others[0], SIGMA_SQ),
        g_w=BidDistribution.lognormal(others[1], SIGMA_SQ),
        alpha=alpha,
        p=p,
        v_m=lognormal_mean(focal[0]),
        v_w=lognormal_mean(focal[1]),
        delta=delta,
    )


@pytest.fixture
def equal_price():
    return table1_model("equal_price")


@pytest.fixture
def expensive_female():
    return table1_model("expensive_female")


@pytest.fixture
def uniform01():
    return BidDistribution.empirical([0.0, 1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
