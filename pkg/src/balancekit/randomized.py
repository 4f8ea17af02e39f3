"""Randomized balancing over truncated low-precision state.

Each step samples a node with probability proportional to the truncated
weight incident on it.  It balances the node only when that weight is
significant and the truncated imbalance is large.  Truncation is realized by
rounding down: scaled entries to multiples of ``r`` and coordinates of ``x``
to multiples of ``q``.
"""

from __future__ import annotations

import bisect
import enum
import itertools
import math
import random
import time
import warnings
from typing import Sequence

from .errors import DegenerateWeights, InvariantViolation, Overflow
from .model import BalanceState, BalancingProblem, TraceRecord, _scaled
from .schedulers import Observer, RunReport, TerminatedBy, TraceSink, _Driver

# Smallest grid step we are willing to represent.
MIN_STEP = 1e-300


class Outcome(str, enum.Enum):
    SKIP_SMALL = "skip_small"
    SKIP_BALANCED = "skip_balanced"
    BALANCE_REGULAR = "balance_regular"
    BALANCE_ZERO_COL = "balance_zero_col"
    BALANCE_ZERO_ROW = "balance_zero_row"


def floor_to_grid(value: float, step: float) -> float:
    """Largest multiple of ``step`` not above ``value``.

    When ``step`` is finer than the spacing of floats near ``value`` the grid
    cannot be represented; ``value`` itself is returned, which still satisfies
    ``0 <= value - result <= step``.
    """
    if math.ulp(value) >= step:
        return value
    t = math.floor(value / step) * step
    while t > value:
        t = math.nextafter(t, -math.inf)
    while value - t > step:
        t = math.nextafter(t, math.inf)
    return t


def precision_steps(problem: BalancingProblem, eps: float, k: int = 10) -> tuple[float, float, int]:
    """``(r, q, k_used)`` with ``q = (eps/(w n))**k`` and ``r = a_min * q``.

    ``k`` is lowered until both steps are at least ``MIN_STEP``.
    """
    if k < 1:
        raise ValueError("precision exponent must be at least 1")
    base = eps / (problem.w * problem.n)
    for kk in range(k, 0, -1):
        q = base**kk
        r = problem.a_min * q
        if q >= MIN_STEP and r >= MIN_STEP:
            return r, q, kk
    raise ValueError(f"eps/(w n) = {base:.3g} is too small for binary64 truncation steps")


class RandomizedState:
    """Truncated mirror of a balancing run.

    ``x_hat`` is shared with ``exact``, a :class:`BalanceState` evaluated at
    ``x_hat`` against the true weights; it is used only for convergence tests
    and auditing, never for decisions.
    """

    def __init__(self, problem: BalancingProblem, eps: float, seed: int | None = 0, k: int = 10):
        if not eps > 0:
            raise ValueError("eps must be positive")
        self.problem = problem
        self.eps = eps
        self.seed = seed
        self.r, self.q, self.k = precision_steps(problem, eps, k)
        self.warnings: list[str] = []
        if self.k != k:
            msg = (f"precision exponent lowered from {k} to {self.k} "
                   f"to keep truncation steps above {MIN_STEP:g}")
            self.warnings.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
        self.threshold = eps * problem.a_min / (10.0 * problem.w * problem.n)
        self.rng = random.Random(seed)
        self.exact = BalanceState(problem)
        self.a_hat = [floor_to_grid(v, self.r) for v in self.exact.entries]
        self._resum()
        self.steps = 0

    @property
    def x_hat(self) -> list[float]:
        return self.exact.x

    def _resum(self) -> None:
        p = self.problem
        row = [0.0] * p.n
        col = [0.0] * p.n
        for i, j, v in zip(p.src, p.dst, self.a_hat):
            row[i] += v
            col[j] += v
        self.row_hat = row
        self.col_hat = col

    def total_hat(self) -> float:
        return math.fsum(self.row_hat)

    def probabilities(self) -> list[float]:
        total = 2.0 * self.total_hat()
        if total <= 0.0:
            raise DegenerateWeights("all truncated entries are zero")
        return [(r + c) / total for r, c in zip(self.row_hat, self.col_hat)]

    def check_invariants(self) -> None:
        """Exhaustive audit of the truncation sandwich and the truncated sums."""
        p = self.problem
        x = self.x_hat
        for k, (i, j, a) in enumerate(zip(p.src, p.dst, p.weight)):
            exact = _scaled(a, x[i] - x[j])
            gap = exact - self.a_hat[k]
            if not 0.0 <= gap <= self.r:
                raise InvariantViolation(
                    f"arc ({i},{j}): exact - truncated = {gap!r} outside [0, r={self.r!r}]")
        for i in range(p.n):
            for sums, adj, what in ((self.row_hat, p.out_adj, "row"), (self.col_hat, p.in_adj, "col")):
                ref = math.fsum(self.a_hat[k] for k in adj[i])
                tol = 1e-12 * max(1, len(adj[i])) * max(1.0, abs(ref))
                if abs(sums[i] - ref) > tol:
                    raise InvariantViolation(f"{what}_hat[{i}] = {sums[i]!r} drifted from {ref!r}")


def sample_index(state: RandomizedState) -> int:
    """Draw a node with probability ``(row_hat + col_hat) / (2 * sum(a_hat))``."""
    weights = [r + c for r, c in zip(state.row_hat, state.col_hat)]
    cumulative = list(itertools.accumulate(weights))
    total = cumulative[-1]
    if total <= 0.0:
        raise DegenerateWeights("all truncated entries are zero")
    u = state.rng.random() * total
    i = bisect.bisect_right(cumulative, u)
    # u < total always, but rounding in the running sum may push past the end
    return min(i, len(cumulative) - 1)


def classify(state: RandomizedState, i: int) -> Outcome:
    row = state.row_hat[i]
    col = state.col_hat[i]
    if row + col < state.threshold:
        return Outcome.SKIP_SMALL
    big, small = max(row, col), min(row, col)
    if small == 0.0:
        return Outcome.BALANCE_ZERO_COL if col == 0.0 else Outcome.BALANCE_ZERO_ROW
    if big / small >= 1.0 + state.eps / state.problem.n:
        return Outcome.BALANCE_REGULAR
    return Outcome.SKIP_BALANCED


def _step_size(state: RandomizedState, i: int, outcome: Outcome) -> float:
    row = state.row_hat[i]
    col = state.col_hat[i]
    nr = state.problem.n * state.r
    if outcome is Outcome.BALANCE_REGULAR:
        return 0.5 * math.log(col / row)
    if outcome is Outcome.BALANCE_ZERO_COL:
        return 0.5 * math.log(nr / row)
    return 0.5 * math.log(col / nr)


def _apply(state: RandomizedState, i: int, alpha: float, debug: bool) -> float:
    """Move ``x_hat[i]`` by ``alpha`` on the q-grid and refresh the truncated arcs.

    Returns the applied change of ``x_hat[i]``.
    """
    p = state.problem
    exact = state.exact
    old = exact.x[i]
    target = old + alpha
    new = floor_to_grid(target, state.q)
    if debug and not (target - state.q <= new <= target):
        raise InvariantViolation(f"x_hat[{i}] = {new!r} off the grid window below {target!r}")
    exact.move(i, new)
    a_hat, entries, r = state.a_hat, exact.entries, state.r
    row_hat, col_hat = state.row_hat, state.col_hat
    new_row = 0.0
    for k in p.out_adj[i]:
        v = floor_to_grid(entries[k], r)
        col_hat[p.dst[k]] += v - a_hat[k]
        a_hat[k] = v
        new_row += v
    new_col = 0.0
    for k in p.in_adj[i]:
        v = floor_to_grid(entries[k], r)
        row_hat[p.src[k]] += v - a_hat[k]
        a_hat[k] = v
        new_col += v
    row_hat[i] = new_row
    col_hat[i] = new_col
    return new - old


def _advance(state: RandomizedState, debug: bool) -> tuple[int, Outcome, float]:
    i = sample_index(state)
    outcome = classify(state, i)
    applied = 0.0
    if outcome in (Outcome.BALANCE_REGULAR, Outcome.BALANCE_ZERO_COL, Outcome.BALANCE_ZERO_ROW):
        applied = _apply(state, i, _step_size(state, i, outcome), debug)
        if state.exact.refresh_due:
            state.exact.refresh()
            state._resum()
    state.steps += 1
    return i, outcome, applied


def randomized_step(state: RandomizedState, debug: bool = False) -> TraceRecord:
    """One sampled iteration.  Skips consume randomness but change nothing.

    The record's ``node`` is ``None`` for skipped samples and ``alpha`` is the
    change actually applied to ``x_hat``, so replaying records is exact.
    """
    exact = state.exact
    l1, l2 = exact.grad_norms()
    f_before = exact.f
    it = state.steps
    i, outcome, applied = _advance(state, debug)
    if debug:
        state.check_invariants()
    node = None if outcome in (Outcome.SKIP_SMALL, Outcome.SKIP_BALANCED) else i
    return TraceRecord(it, node, applied, f_before, exact.f, l1, l2, l2 / f_before)


def default_random_cap(problem: BalancingProblem, eps: float) -> int:
    return math.ceil(3200.0 / eps**2 * math.log(max(problem.w, math.e)))


def run_randomized(problem: BalancingProblem, eps: float, seed: int | None = 0,
                   iteration_cap: int | None = None, trace_sink: TraceSink | None = None, *,
                   k: int = 10, keep_trace: bool = True, observer: Observer | None = None,
                   timing: bool = True, debug: bool = False) -> RunReport:
    """Sample and balance until the true scaled matrix is ``eps``-balanced or capped.

    Every sampled step counts toward the cap, skipped or not.  With ``debug``
    the truncation sandwich, the grid contract and the truncated sums are
    audited after every step.
    """
    if iteration_cap is None:
        iteration_cap = default_random_cap(problem, eps)
    state = RandomizedState(problem, eps, seed, k)
    exact = state.exact
    drv = _Driver(exact, eps, trace_sink, keep_trace, observer, timing)
    drv.observed = state
    it = 0
    try:
        while True:
            l1, l2, done = drv.check()
            if done or it >= iteration_cap:
                why = TerminatedBy.CONVERGED if done else TerminatedBy.ITERATION_CAP
                return drv.report(it, why, "random", seed=seed, engine=state)
            started = drv.clock()
            f_before = exact.f
            i, outcome, applied = _advance(state, debug)
            if debug:
                state.check_invariants()
            node = None if outcome in (Outcome.SKIP_SMALL, Outcome.SKIP_BALANCED) else i
            drv.record(it, node, applied, f_before, l1, l2, started)
            it += 1
    except Overflow as err:
        err.report = drv.report(it, TerminatedBy.OVERFLOW, "random", seed=seed, engine=state)
        raise

