"""Reference optimum, invariant checkers and the slow-convergence instance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CapExhausted, InvalidCycle
from .model import BalanceState, BalancingProblem, objective
from .randomized import RandomizedState, run_randomized
from .schedulers import run_greedy, run_round_robin


@dataclass(frozen=True)
class OracleResult:
    x_star: np.ndarray
    f_star: float
    residual_imbalance: float
    iterations: int


def oracle_balance(problem: BalancingProblem, tol: float = 1e-12, cap: int = 10**9) -> OracleResult:
    """Round-robin balancing to imbalance ``tol``; ``x_star`` is shifted so ``x_star[0] = 0``.

    Any point of (near) zero imbalance is a (near) minimizer of the convex
    objective, so this serves as the optimum for the checks below.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    report = run_round_robin(problem, tol, round_cap=-(-cap // problem.n),
                             keep_trace=False, timing=False)
    if not report.converged:
        raise CapExhausted(f"imbalance {tol:g} not reached in {cap} steps")
    x = np.asarray(report.final.x)
    x = x - x[0]
    state = BalanceState(problem, x)
    l2 = state.grad_norms()[1]
    return OracleResult(x, objective(state), l2 / state.f, report.iterations)


@dataclass(frozen=True)
class GapCheck:
    gap: float
    bound: float
    holds: bool


def check_gap_bound(problem: BalancingProblem, x: Sequence[float], oracle: OracleResult) -> GapCheck:
    """Test ``f(x) - f(x*) <= (n/2) * ||grad f(x)||_1`` with slack ``1e-8 * f(x)``."""
    state = BalanceState(problem, x)
    fx = objective(state)
    gap = fx - oracle.f_star
    bound = 0.5 * problem.n * state.grad_norms()[0]
    return GapCheck(gap, bound, gap <= bound + 1e-8 * fx)


@dataclass(frozen=True)
class LowerBoundInstance:
    """4-node chain whose middle 2-cycle is badly skewed; ``beta = 100 * eps``.

    Nodes are 0-based: the skewed pair is ``(1, 2)`` with ``a[1][2] = beta + eps``
    and ``a[2][1] = eps``.
    """

    eps: float
    beta: float
    problem: BalancingProblem
    a_star: dict = field(repr=False)
    d_star: tuple[float, ...] = field(repr=False)

    @property
    def initial_ratio(self) -> float:
        return self.eps / (self.beta + self.eps)

    @property
    def growth_bound(self) -> float:
        """Largest per-step growth of the skew ratio."""
        return (1.0 + 7.0 * math.sqrt(self.beta)) / (1.0 + self.eps)

    @property
    def min_iterations(self) -> float:
        """Iterations needed before the ratio can pass 1/100."""
        return math.log(101 / 100) / math.log(1.0 + 7.0 * math.sqrt(self.beta))

    def ratio(self, entries: Sequence[float]) -> float:
        return entries[self._k32] / entries[self._k23]

    @property
    def _k23(self) -> int:
        return self.problem.arc_index(1, 2)

    @property
    def _k32(self) -> int:
        return self.problem.arc_index(2, 1)


def lower_bound_instance(eps: float) -> LowerBoundInstance:
    if not 0 < eps < 1e-3:
        raise ValueError("eps must lie in (0, 1e-3)")
    beta = 100.0 * eps
    arcs = [(0, 1, 1.0), (1, 0, 1.0), (1, 2, beta + eps), (2, 1, eps), (2, 3, 1.0), (3, 2, 1.0)]
    problem = BalancingProblem.from_arcs(4, arcs)
    mid = math.sqrt(eps * (beta + eps))
    a_star = {(0, 1): 1.0, (1, 0): 1.0, (1, 2): mid, (2, 1): mid, (2, 3): 1.0, (3, 2): 1.0}
    s = math.sqrt((beta + eps) / eps)
    return LowerBoundInstance(eps, beta, problem, a_star, (1.0, 1.0, s, s))


@dataclass
class RatioTrajectory:
    points: list[tuple[int, float]]
    iterations: int
    converged: bool
    initial_ratio: float
    final_ratio: float
    max_growth: float
    growth_bound: float
    growth_holds: bool
    stopping_holds: bool


class _RatioWatch:
    def __init__(self, instance: LowerBoundInstance, stride: int):
        self.instance = instance
        self.stride = stride
        self.last = instance.initial_ratio
        self.points = [(0, self.last)]
        self.max_growth = 1.0

    def __call__(self, state, record) -> None:
        if isinstance(state, RandomizedState):
            state = state.exact
        ratio = self.instance.ratio(state.entries)
        growth = ratio / self.last
        if growth > self.max_growth:
            self.max_growth = growth
        self.last = ratio
        t = record.iter + 1
        if t % self.stride == 0:
            self.points.append((t, ratio))


def ratio_trajectory(instance: LowerBoundInstance, scheduler: str = "greedy", *,
                     seed: int = 0, eps_target: float | None = None, stride: int = 1,
                     iteration_cap: int | None = None, trace_sink=None) -> RatioTrajectory:
    """Run ``scheduler`` on the instance and follow the skew ratio ``a[2][1] / a[1][2]``.

    Checks that no step grows the ratio beyond ``instance.growth_bound`` (slack
    1e-9) and that the ratio exceeds 1/100 once the matrix is balanced.
    ``points`` keeps every ``stride``-th iterate plus the first and last.
    """
    eps = instance.eps if eps_target is None else eps_target
    watch = _RatioWatch(instance, stride)
    common = dict(trace_sink=trace_sink, keep_trace=False, observer=watch, timing=False)
    if scheduler == "greedy":
        report = run_greedy(instance.problem, eps, iteration_cap, **common)
    elif scheduler in ("roundrobin", "round_robin"):
        cap = None if iteration_cap is None else -(-iteration_cap // instance.problem.n)
        report = run_round_robin(instance.problem, eps, cap, **common)
    elif scheduler in ("random", "randomized"):
        report = run_randomized(instance.problem, eps, seed, iteration_cap, **common)
    else:
        raise ValueError(f"unknown scheduler {scheduler!r}")
    final = instance.ratio(report.final.entries)
    if watch.points[-1][0] != report.iterations:
        watch.points.append((report.iterations, final))
    return RatioTrajectory(
        points=watch.points,
        iterations=report.iterations,
        converged=report.converged,
        initial_ratio=instance.initial_ratio,
        final_ratio=final,
        max_growth=watch.max_growth,
        growth_bound=instance.growth_bound,
        growth_holds=watch.max_growth <= instance.growth_bound + 1e-9,
        stopping_holds=(not report.converged) or final > 1 / 100,
    )


def _cycle_arcs(problem: BalancingProblem, cycle: Sequence[int]) -> list[int]:
    if len(cycle) < 2 or len(set(cycle)) != len(cycle):
        raise InvalidCycle(f"{list(cycle)} is not a simple cycle")
    arcs = []
    for a, b in zip(cycle, list(cycle[1:]) + [cycle[0]]):
        k = problem.arc_index(a, b)
        if k is None:
            raise InvalidCycle(f"arc ({a}, {b}) is missing")
        arcs.append(k)
    return arcs


def sample_cycles(problem: BalancingProblem, count: int = 20, rng=None) -> list[list[int]]:
    """All 2-cycles plus ``count`` cycles closed by random walks at their first repeat."""
    rng = np.random.default_rng(rng)
    cycles = [[i, j] for i, j in zip(problem.src, problem.dst)
              if i < j and problem.arc_index(j, i) is not None]
    for _ in range(count):
        walk = [int(rng.integers(problem.n))]
        seen = {walk[0]: 0}
        while True:
            out = problem.out_adj[walk[-1]]
            nxt = problem.dst[out[int(rng.integers(len(out)))]]
            if nxt in seen:
                cycles.append(walk[seen[nxt]:])
                break
            seen[nxt] = len(walk)
            walk.append(nxt)
    return cycles


class CycleProductMonitor:
    """Observer that checks cycle products of the scaled entries after every step.

    Products are compared in log space against the products of the original
    weights, which every diagonal similarity preserves.
    """

    def __init__(self, problem: BalancingProblem, cycles: Iterable[Sequence[int]], rtol: float = 1e-8):
        self.problem = problem
        self.rtol = rtol
        self.cycles = [_cycle_arcs(problem, c) for c in cycles]
        self.reference = [math.fsum(math.log(problem.weight[k]) for k in arcs) for arcs in self.cycles]
        self.max_deviation = 0.0
        self.checked = 0

    def check(self, entries: Sequence[float]) -> bool:
        ok = True
        for arcs, ref in zip(self.cycles, self.reference):
            dev = abs(math.fsum(math.log(entries[k]) for k in arcs) - ref)
            self.max_deviation = max(self.max_deviation, dev)
            ok &= dev <= self.rtol
        self.checked += 1
        return ok

    def __call__(self, state, record=None) -> None:
        if isinstance(state, RandomizedState):
            state = state.exact
        self.check(state.entries)

    @property
    def ok(self) -> bool:
        return self.max_deviation <= self.rtol


def check_cycle_products(problem: BalancingProblem, snapshots: Iterable, cycles: Iterable[Sequence[int]],
                         rtol: float = 1e-8) -> bool:
    """True iff every cycle product is unchanged over all snapshots.

    A snapshot is a :class:`BalanceState` or a per-arc sequence of scaled entries.
    """
    monitor = CycleProductMonitor(problem, cycles, rtol)
    for snap in snapshots:
        monitor.check(snap.entries if isinstance(snap, BalanceState) else snap)
    return monitor.ok


class StepAuditor:
    """Trace sink that replays ``(node, alpha)`` moves on its own state.

    For each balancing record it recomputes the pre-step row/column sums from
    scratch and checks that the recorded ``f_before - f_after`` equals
    ``(sqrt(col) - sqrt(row))**2`` and that the recorded ``f`` values match the
    replayed objective, both within ``rtol * f_before``.  With ``greedy=True``
    it also checks the decrease is at least ``||grad f||_2**2 / (4 f)``.
    """

    def __init__(self, problem: BalancingProblem, rtol: float = 1e-9, greedy: bool = False):
        self.problem = problem
        self.rtol = rtol
        self.greedy = greedy
        self.state = BalanceState(problem)
        self.steps = 0
        self.failures: list[str] = []
        self.max_identity_error = 0.0

    def append(self, rec) -> None:
        self.steps += 1
        state = self.state
        if rec.node is None or rec.alpha == 0.0:
            if abs(rec.f_before - rec.f_after) > self.rtol * rec.f_before:
                self._fail(rec, "skipped step changed f")
            return
        state.refresh()
        i = rec.node
        gain = state.gain(i)
        f_true = state.f
        if abs(rec.f_before - f_true) > self.rtol * f_true:
            self._fail(rec, f"f_before {rec.f_before!r} != replayed {f_true!r}")
        err = abs((rec.f_before - rec.f_after) - gain) / rec.f_before
        self.max_identity_error = max(self.max_identity_error, err)
        if err > self.rtol:
            self._fail(rec, f"decrease {rec.f_before - rec.f_after!r} != gain {gain!r}")
        if self.greedy:
            l2 = state.grad_norms()[1]
            if rec.f_before - rec.f_after < l2 * l2 / (4.0 * f_true) - 1e-12 * f_true:
                self._fail(rec, "greedy decrease below ||grad||^2 / (4 f)")
        state.shift(i, rec.alpha)

    def _fail(self, rec, why: str) -> None:
        if len(self.failures) < 20:
            self.failures.append(f"iter {rec.iter}: {why}")
        elif len(self.failures) == 20:
            self.failures.append("further failures suppressed")

    @property
    def ok(self) -> bool:
        return not self.failures
