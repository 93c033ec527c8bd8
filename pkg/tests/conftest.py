import numpy as np
import pytest

from treegarrote.data import friedman1
from treegarrote.forest import ForestParams, fit_forest
from treegarrote.ruleset import decompose_rules, extract_rules, group_rules


@pytest.fixture(scope="session")
def small_data():
    return friedman1(120, noise_sd=1.0, extra_noise_vars=2, seed=11)


@pytest.fixture(scope="session")
def small_forest(small_data):
    return fit_forest(small_data, ForestParams(num_trees=20, mtry=3, min_node_size=5, seed=4))


@pytest.fixture(scope="session")
def small_rules(small_forest):
    raw = extract_rules(small_forest)
    return raw, decompose_rules(raw)


@pytest.fixture(scope="session")
def small_groups(small_rules, small_forest):
    return group_rules(small_rules[1], small_forest.p)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
