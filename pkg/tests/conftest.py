import numpy as np
import pytest

from balancekit import BalancingProblem


def skewed_chain(eps, beta):
    """The 4x4 chain with a skewed middle 2-cycle, for arbitrary beta."""
    arcs = [(0, 1, 1.0), (1, 0, 1.0), (1, 2, beta + eps), (2, 1, eps), (2, 3, 1.0), (3, 2, 1.0)]
    return BalancingProblem.from_arcs(4, arcs)


@pytest.fixture
def chain():
    return skewed_chain(0.01, 1.0)


@pytest.fixture
def two_cycle():
    return BalancingProblem.from_arcs(2, [(0, 1, 4.0), (1, 0, 1.0)])


@pytest.fixture
def three_cycle():
    return BalancingProblem.from_arcs(3, [(0, 1, 1.0), (1, 2, 2.0), (2, 0, 4.0)])


@pytest.fixture
def symmetric():
    a = np.array([[0, 2, 0, 1], [2, 0, 3, 0], [0, 3, 0, 5], [1, 0, 5, 0]], dtype=float)
    return BalancingProblem.from_arcs(4, [(i, j, a[i, j]) for i in range(4) for j in range(4) if a[i, j]])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        ok, detail = RESULTS[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
