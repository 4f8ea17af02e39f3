import numpy as np
import pytest

from balancekit import balance_lp, run_greedy
from balancekit.lp import run_variant


def test_p1_matches_plain(two_cycle):
    lp = balance_lp(two_cycle, 1, 1e-9)
    plain = run_greedy(two_cycle, 1e-9)
    assert lp.report.iterations == plain.iterations
    np.testing.assert_array_equal(lp.d, np.exp(plain.final.x))


def test_p2_two_cycle(two_cycle):
    lp = balance_lp(two_cycle.to_dense(), 2, 1e-12)
    assert lp.problem.weight == (16.0, 1.0)
    assert lp.report.final.entries == pytest.approx([4.0, 4.0], rel=1e-12)
    d = lp.d
    assert d[1] / d[0] == pytest.approx(2.0, rel=1e-12)
    scaled = np.diag(d) @ two_cycle.to_dense() @ np.diag(1 / d)
    rows = np.linalg.norm(scaled, 2, axis=1)
    cols = np.linalg.norm(scaled, 2, axis=0)
    np.testing.assert_allclose(rows, [2.0, 2.0], rtol=1e-12)
    np.testing.assert_allclose(cols, [2.0, 2.0], rtol=1e-12)


def test_p3_symmetric_no_iterations(symmetric):
    for variant in ("greedy", "roundrobin", "random"):
        lp = balance_lp(symmetric, 3, 1e-9, variant)
        assert lp.report.iterations == 0
        np.testing.assert_array_equal(lp.d, 1.0)


@pytest.mark.parametrize("p", [0, -1, 1.5])
def test_bad_p(two_cycle, p):
    with pytest.raises(ValueError):
        balance_lp(two_cycle, p, 0.1)


def test_unknown_variant(two_cycle):
    with pytest.raises(ValueError):
        run_variant(two_cycle, 0.1, "sinkhorn")


def test_roundrobin_cap_counts_steps(two_cycle):
    from balancekit import random_problem
    problem = random_problem(10, rng=3)
    report = run_variant(problem, 1e-12, "roundrobin", iteration_cap=25)
    assert report.iterations <= 30 and report.rounds == 3
