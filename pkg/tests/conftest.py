import sys
from pathlib import Path

import numpy as np
import pytest

from diffqos import Scenario, UserProfile

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

CASE1 = dict(v=1.0, q=2.0, b=[0.1, 0.5, 1.0, 2.0])
CASE2 = dict(v=1.0, q=[1.0, 2.0, 3.0, 4.0], b=1.5)
CASE3 = dict(v=[1.0, 2.0, 3.0, 4.0], q=2.0, b=1.5)

CASE1_BIDS = [0.33, 0.46, 0.53, 0.53]
CASE2_BIDS = [0.83, 0.52, 0.43, 0.38]
CASE2_THROUGHPUTS = [0.24, 0.58, 0.88, 1.11]
CASE3_BIDS = [0.94, 1.22, 1.42, 1.55]


@pytest.fixture
def case1():
    return Scenario.from_arrays(**CASE1)


@pytest.fixture
def case2():
    return Scenario.from_arrays(**CASE2)


@pytest.fixture
def case3():
    return Scenario.from_arrays(**CASE3)


def random_users(rng, n, v=(0.5, 4.0), q=(0.5, 4.0), b=(0.2, 2.0)):
    return [
        UserProfile(i, float(rng.uniform(*v)), float(rng.uniform(*q)), float(rng.uniform(*b)))
        for i in range(n)
    ]


def random_bids(rng, users):
    # strictly inside (0, v]
    return np.array([u.v * (1.0 - rng.uniform(0.0, 1.0)) for u in users])


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.VERDICTS:
            terminalreporter.write_line(line)
