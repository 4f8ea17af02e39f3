"""Balancing in the Lp norm by reduction to L1 on the entrywise p-th power."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import BalancingProblem, canonicalize
from .randomized import run_randomized
from .schedulers import RunReport, run_greedy, run_round_robin

VARIANTS = ("greedy", "roundrobin", "random")


@dataclass
class LpResult:
    report: RunReport
    d: np.ndarray
    problem: BalancingProblem
    p: int


def power_problem(problem: BalancingProblem, p: int) -> BalancingProblem:
    return BalancingProblem.from_arcs(problem.n, ((i, j, a**p) for i, j, a in problem.arcs))


def run_variant(problem: BalancingProblem, eps: float, variant: str, *, seed: int = 0,
                iteration_cap: int | None = None, trace_sink=None, k: int = 10,
                keep_trace: bool = True, timing: bool = True, observer=None) -> RunReport:
    """Dispatch to a scheduler; ``iteration_cap`` always counts balancing steps."""
    common = dict(trace_sink=trace_sink, keep_trace=keep_trace, timing=timing, observer=observer)
    if variant == "greedy":
        return run_greedy(problem, eps, iteration_cap, **common)
    if variant == "roundrobin":
        rounds = None if iteration_cap is None else math.ceil(iteration_cap / problem.n)
        return run_round_robin(problem, eps, rounds, **common)
    if variant == "random":
        return run_randomized(problem, eps, seed, iteration_cap, k=k, **common)
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def balance_lp(raw, p: int, eps: float, variant: str = "greedy", **kwargs) -> LpResult:
    """Balance ``raw`` in the Lp norm.

    The entrywise p-th power of ``|raw|`` is balanced in L1 to ``eps``; if
    ``exp(x)`` balances that matrix then ``d = exp(x / p)`` balances ``raw`` in
    Lp.  Large ``p`` widens the dynamic range and makes overflow more likely.
    """
    if int(p) != p or p < 1:
        raise ValueError("p must be an integer >= 1")
    p = int(p)
    base = raw if isinstance(raw, BalancingProblem) else canonicalize(raw)
    problem = base if p == 1 else power_problem(base, p)
    report = run_variant(problem, eps, variant, **kwargs)
    d = np.exp(np.asarray(report.final.x) / p)
    return LpResult(report, d, problem, p)
