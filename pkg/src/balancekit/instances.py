"""Random strongly connected test instances."""

from __future__ import annotations

import numpy as np

from .model import BalancingProblem


def random_problem(n: int, density: float = 0.2, rng=None,
                   weight_range: tuple[float, float] = (1.0, 1e3)) -> BalancingProblem:
    """Random sparse digraph made strongly connected by a random Hamiltonian cycle.

    Each off-diagonal arc is present with probability ``density``; weights are
    log-uniform on ``weight_range``.
    """
    if n < 2:
        raise ValueError("need at least two nodes")
    rng = np.random.default_rng(rng)
    lo, hi = np.log(weight_range[0]), np.log(weight_range[1])
    mask = rng.random((n, n)) < density
    np.fill_diagonal(mask, False)
    perm = rng.permutation(n)
    mask[perm, np.roll(perm, -1)] = True
    rows, cols = np.nonzero(mask)
    weights = np.exp(rng.uniform(lo, hi, size=rows.size))
    return BalancingProblem.from_arcs(n, zip(rows.tolist(), cols.tolist(), weights.tolist()))
