"""Balancing step plus the greedy and round-robin schedulers."""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Protocol, Sequence

from .errors import NotBalanceable, Overflow
from .model import BalanceState, BalancingProblem, TraceRecord
from .queue import GainQueue


class TraceSink(Protocol):
    def append(self, record: TraceRecord) -> None: ...


Observer = Callable[[BalanceState, TraceRecord], None]


class TerminatedBy(str, enum.Enum):
    CONVERGED = "converged"
    ITERATION_CAP = "iteration_cap"
    OVERFLOW = "overflow"


@dataclass
class RunReport:
    final: BalanceState
    iterations: int
    terminated_by: TerminatedBy
    scheduler: str
    eps: float
    trace: list[TraceRecord] = field(default_factory=list, repr=False)
    rounds: int | None = None
    seed: int | None = None
    engine: object = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.terminated_by is TerminatedBy.CONVERGED

    @property
    def x(self) -> list[float]:
        return list(self.final.x)


class Step(NamedTuple):
    node: int
    alpha: float
    decrease: float


def balance_index(state: BalanceState, i: int) -> Step:
    """Balance node ``i`` of ``state`` in place.

    Row ``i`` is scaled by ``sqrt(col/row)`` and column ``i`` by its inverse, so
    both sums become ``sqrt(row*col)`` and ``f`` drops by
    ``(sqrt(col) - sqrt(row))**2``.  An already balanced node is left untouched.
    """
    row = state.row_sum[i]
    col = state.col_sum[i]
    if row == col:
        return Step(i, 0.0, 0.0)
    if not (row > 0.0 and col > 0.0):
        raise NotBalanceable(f"node {i} has an empty row or column")
    alpha = 0.5 * math.log(col / row)
    decrease = (math.sqrt(col) - math.sqrt(row)) ** 2
    state.shift(i, alpha)
    return Step(i, alpha, decrease)


def greedy_select(queue: GainQueue) -> int:
    """Node with the largest balancing gain; ties go to the smallest id."""
    return queue.top()


def default_greedy_cap(problem: BalancingProblem, eps: float) -> int:
    return math.ceil(4.0 / eps**2 * math.log(problem.w)) + problem.n


def default_round_cap(problem: BalancingProblem, eps: float) -> int:
    return max(1, math.ceil(16.0 * problem.n / eps**2 * math.log(problem.w)))


class _Driver:
    """Shared bookkeeping for a scheduler loop: convergence test, tracing, timing."""

    def __init__(self, state, eps, trace_sink, keep_trace, observer, timing):
        if not eps > 0:
            raise ValueError("eps must be positive")
        self.state = state
        self.observed = state
        self.eps = eps
        self.sink = trace_sink
        self.trace = [] if keep_trace else None
        self.observer = observer
        self.timing = timing
        self.refreshed = False

    def check(self) -> tuple[float, float, bool]:
        """Gradient norms of the current state and whether it is eps-balanced.

        A positive answer from the maintained sums is confirmed against a
        from-scratch recomputation before it is trusted.
        """
        state = self.state
        l1, l2 = state.grad_norms()
        self.refreshed = False
        if l2 <= self.eps * state.f:
            state.refresh()
            self.refreshed = True
            l1, l2 = state.grad_norms()
            return l1, l2, l2 <= self.eps * state.f
        return l1, l2, False

    def clock(self) -> int:
        return time.perf_counter_ns() if self.timing else 0

    def record(self, it, node, alpha, f_before, l1, l2, started) -> TraceRecord:
        ns = time.perf_counter_ns() - started if self.timing else 0
        rec = TraceRecord(it, node, alpha, f_before, self.state.f, l1, l2, l2 / f_before, ns)
        if self.trace is not None:
            self.trace.append(rec)
        if self.sink is not None:
            self.sink.append(rec)
        if self.observer is not None:
            self.observer(self.observed, rec)
        return rec

    def report(self, iterations, terminated_by, scheduler, **extra) -> RunReport:
        return RunReport(self.state, iterations, terminated_by, scheduler, self.eps,
                         self.trace if self.trace is not None else [], **extra)


def run_greedy(problem: BalancingProblem, eps: float, iteration_cap: int | None = None,
               trace_sink: TraceSink | None = None, *, keep_trace: bool = True,
               observer: Observer | None = None, timing: bool = True,
               x0: Sequence[float] | None = None) -> RunReport:
    """Repeatedly balance the node of largest gain until ``eps``-balanced or capped.

    Overflow propagates with the partial report attached as ``err.report``.
    """
    if iteration_cap is None:
        iteration_cap = default_greedy_cap(problem, eps)
    if iteration_cap < 0:
        raise ValueError("iteration_cap must be non-negative")
    state = BalanceState(problem, x0)
    drv = _Driver(state, eps, trace_sink, keep_trace, observer, timing)
    queue = GainQueue([state.gain(i) for i in range(problem.n)])
    neighbors = problem.neighbors
    it = 0
    try:
        while True:
            l1, l2, done = drv.check()
            if drv.refreshed:
                queue.rebuild([state.gain(i) for i in range(problem.n)])
            if done:
                return drv.report(it, TerminatedBy.CONVERGED, "greedy")
            if it >= iteration_cap:
                return drv.report(it, TerminatedBy.ITERATION_CAP, "greedy")
            started = drv.clock()
            f_before = state.f
            i = greedy_select(queue)
            step = balance_index(state, i)
            if state.refresh_due:
                state.refresh()
                queue.rebuild([state.gain(v) for v in range(problem.n)])
            else:
                queue.update(i, state.gain(i))
                for j in neighbors[i]:
                    queue.update(j, state.gain(j))
            drv.record(it, i, step.alpha, f_before, l1, l2, started)
            it += 1
    except Overflow as err:
        err.report = drv.report(it, TerminatedBy.OVERFLOW, "greedy")
        raise


def run_round_robin(problem: BalancingProblem, eps: float, round_cap: int | None = None,
                    order: Sequence[int] | None = None, trace_sink: TraceSink | None = None, *,
                    keep_trace: bool = True, observer: Observer | None = None,
                    timing: bool = True, x0: Sequence[float] | None = None) -> RunReport:
    """Balance nodes in a fixed cyclic ``order``, testing convergence after every step."""
    n = problem.n
    order = list(range(n)) if order is None else [int(v) for v in order]
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the nodes")
    if round_cap is None:
        round_cap = default_round_cap(problem, eps)
    if round_cap < 0:
        raise ValueError("round_cap must be non-negative")
    step_cap = round_cap * n
    state = BalanceState(problem, x0)
    drv = _Driver(state, eps, trace_sink, keep_trace, observer, timing)
    it = 0
    try:
        while True:
            l1, l2, done = drv.check()
            if done or it >= step_cap:
                why = TerminatedBy.CONVERGED if done else TerminatedBy.ITERATION_CAP
                return drv.report(it, why, "roundrobin", rounds=-(-it // n))
            started = drv.clock()
            f_before = state.f
            i = order[it % n]
            step = balance_index(state, i)
            if state.refresh_due:
                state.refresh()
            drv.record(it, i, step.alpha, f_before, l1, l2, started)
            it += 1
    except Overflow as err:
        err.report = drv.report(it, TerminatedBy.OVERFLOW, "roundrobin", rounds=-(-it // n))
        raise


def round_factors(report: RunReport, n: int) -> list[tuple[float, float, float]]:
    """Per complete round: ``(imbalance at round start, f at start, f_end / f_start)``."""
    out = []
    trace = report.trace
    for start in range(0, len(trace) - n + 1, n):
        first, last = trace[start], trace[start + n - 1]
        out.append((first.imbalance, first.f_before, last.f_after / first.f_before))
    return out
