"""Acceptance gate: criteria 1-9, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` (the lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.  The smallest eps of
criterion 3 (1e-8) needs roughly 10^8 balancing steps, about half an hour in
pure Python, so it only runs when ``BALANCEKIT_SLOW=1`` is set.
"""

from __future__ import annotations

import functools
import math
import os
import time

import numpy as np

from balancekit import (BalanceState, BalancingProblem, CycleProductMonitor, StepAuditor, balance_lp,
                        check_gap_bound, imbalance, lower_bound_instance, oracle_balance,
                        random_problem, ratio_trajectory, run_greedy, run_randomized,
                        run_round_robin, sample_cycles)
from balancekit.lp import power_problem

RESULTS: dict[int, tuple[bool, str]] = {}

SLOW = os.environ.get("BALANCEKIT_SLOW", "") not in ("", "0")
LOWER_BOUND_EPS = (1e-4, 1e-6, 1e-8) if SLOW else (1e-4, 1e-6)
VARIANTS = ("greedy", "roundrobin", "random")


def report(number: int, ok: bool, detail: str) -> None:
    RESULTS[number] = (ok, detail)
    print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    assert ok, detail


# shared corpora and runs --------------------------------------------------------

@functools.lru_cache(maxsize=None)
def corpus() -> tuple[BalancingProblem, ...]:
    sizes = (10, 30, 50)
    return tuple(random_problem(sizes[k % 3], 0.2, rng=1000 + k, weight_range=(1, 1e3))
                 for k in range(50))


@functools.lru_cache(maxsize=None)
def greedy_corpus_runs():
    out = []
    for problem in corpus():
        auditor = StepAuditor(problem, greedy=True)
        rep = run_greedy(problem, 0.01, trace_sink=auditor, keep_trace=False, timing=False)
        out.append((problem, rep, auditor))
    return out


@functools.lru_cache(maxsize=None)
def round_robin_corpus_runs():
    out = []
    for problem in corpus():
        auditor = StepAuditor(problem)
        rep = run_round_robin(problem, 0.05, trace_sink=auditor, keep_trace=False, timing=False)
        out.append((problem, rep, auditor))
    return out


@functools.lru_cache(maxsize=None)
def lower_bound_runs():
    """``{(eps, variant): (trajectory, auditor, seconds)}``."""
    out = {}
    for eps in LOWER_BOUND_EPS:
        inst = lower_bound_instance(eps)
        for variant in VARIANTS:
            auditor = StepAuditor(inst.problem, greedy=variant == "greedy")
            started = time.perf_counter()
            traj = ratio_trajectory(inst, variant, seed=0, stride=10**9, trace_sink=auditor)
            out[eps, variant] = (traj, auditor, time.perf_counter() - started)
    return out


# criteria -----------------------------------------------------------------------

def test_criterion_1_greedy_iteration_bound():
    worst, failures = 0.0, []
    for problem, rep, _ in greedy_corpus_runs():
        bound = math.ceil(4 / 0.01**2 * math.log(problem.w))
        worst = max(worst, rep.iterations / bound)
        if not rep.converged or rep.iterations > bound:
            failures.append((problem.n, rep.iterations, bound))
    report(1, not failures,
           f"50 instances, eps=0.01, max iterations/bound = {worst:.4f}; violations {failures}")


def test_criterion_2_round_robin_round_bound():
    worst, failures = 0.0, []
    for problem, rep, _ in round_robin_corpus_runs():
        bound = math.ceil(16 * problem.n / 0.05**2 * math.log(problem.w))
        worst = max(worst, rep.rounds / bound)
        if not rep.converged or rep.rounds > bound:
            failures.append((problem.n, rep.rounds, bound))
    report(2, not failures,
           f"50 instances, eps=0.05, max rounds/bound = {worst:.2e}; violations {failures}")


def test_criterion_3_lower_bound_growth():
    runs = lower_bound_runs()
    problems = []
    counts = {v: [] for v in VARIANTS}
    for eps in LOWER_BOUND_EPS:
        inst = lower_bound_instance(eps)
        for variant in VARIANTS:
            traj, _, _ = runs[eps, variant]
            counts[variant].append(traj.iterations)
            if not traj.converged:
                problems.append(f"{variant} eps={eps:g} did not converge")
            if traj.iterations < inst.min_iterations:
                problems.append(f"{variant} eps={eps:g}: {traj.iterations} < {inst.min_iterations:.3g}")
            if not (traj.growth_holds and traj.stopping_holds):
                problems.append(f"{variant} eps={eps:g}: ratio checks failed")
    factors = {v: [b / a for a, b in zip(c, c[1:])] for v, c in counts.items()}
    for variant, fs in factors.items():
        for f in fs:
            if not 5 <= f <= 20:
                problems.append(f"{variant} growth x{f:.1f} outside [5, 20]")
    eps_text = ", ".join(f"{e:g}" for e in LOWER_BOUND_EPS)
    summary = "; ".join(f"{v} {counts[v]} (x{', x'.join(f'{f:.1f}' for f in factors[v])})"
                        for v in VARIANTS)
    skipped = "" if SLOW else " [eps=1e-8 skipped, set BALANCEKIT_SLOW=1]"
    report(3, not problems, f"eps in {{{eps_text}}}: {summary}{skipped}; "
                            f"{len(problems)} problem(s): {problems[:4]}")


def test_criterion_4_step_identity():
    auditors = [a for _, _, a in greedy_corpus_runs()] + [a for _, _, a in round_robin_corpus_runs()]
    auditors += [a for _, a, _ in lower_bound_runs().values()]
    steps = sum(a.steps for a in auditors)
    worst = max(a.max_identity_error for a in auditors)
    bad = [f for a in auditors for f in a.failures]
    report(4, not bad, f"{steps} recorded steps audited, max |decrease - gain| / f = {worst:.2e}; "
                       f"failures {bad[:3]}")


def test_criterion_5_cycle_products():
    worst, bad, cycles_total = 0.0, 0, 0
    for k in range(10):
        problem = random_problem((8, 15, 25)[k % 3], 0.3, rng=2000 + k)
        cycles = sample_cycles(problem, 20, rng=k)
        cycles_total += len(cycles)
        monitor = CycleProductMonitor(problem, cycles, rtol=1e-8)
        run_greedy(problem, 1e-300, 10_000, keep_trace=False, timing=False, observer=monitor)
        if monitor.checked != 10_000 or not monitor.ok:
            bad += 1
        worst = max(worst, monitor.max_deviation)
    report(5, bad == 0, f"10 instances x 10^4 steps, {cycles_total} cycles, "
                        f"max |log product drift| = {worst:.2e}")


def test_criterion_6_gap_bound():
    rng = np.random.default_rng(6)
    failures, worst = 0, -math.inf
    for _ in range(100):
        problem = random_problem(int(rng.integers(2, 9)), 0.3, rng=int(rng.integers(2**31)))
        oracle = oracle_balance(problem, 1e-12)
        x = rng.normal(scale=1.5, size=problem.n)
        check = check_gap_bound(problem, x, oracle)
        failures += not check.holds
        worst = max(worst, (check.gap - check.bound) / max(check.bound, 1e-300))
    report(6, failures == 0, f"100 pairs, max (gap - bound)/bound = {worst:.3f}; failures {failures}")


def test_criterion_7_uniqueness():
    worst = 0.0
    for k in range(20):
        problem = random_problem((6, 12, 20, 30)[k % 4], 0.25, rng=3000 + k)
        g = run_greedy(problem, 1e-10, keep_trace=False, timing=False)
        r = run_round_robin(problem, 1e-10, keep_trace=False, timing=False)
        assert g.converged and r.converged
        ge, re = np.array(g.final.entries), np.array(r.final.entries)
        worst = max(worst, float(np.max(np.abs(ge - re) / re)))
    report(7, worst <= 1e-6, f"20 instances, max entrywise relative difference = {worst:.2e}")


def test_criterion_8_randomized():
    per_instance = []
    for k in range(5):
        problem = random_problem(30, 0.2, rng=4000 + k)
        converged = sum(run_randomized(problem, 0.05, seed=s, keep_trace=False, timing=False).converged
                        for s in range(20))
        per_instance.append(converged)

    # exhaustive audit: sandwich and grid window after every step, O(deg) work per step
    problem = random_problem(30, 0.2, rng=4000)
    costs = []

    def cost(state, rec):
        if rec.node is not None:
            costs.append(state.exact.arc_updates - cost.last == problem.degree(rec.node))
        cost.last = state.exact.arc_updates

    cost.last = 0
    # 1e-17 sits below the rounding floor of the imbalance, so all 10^4 steps run
    audit = run_randomized(problem, 1e-17, seed=0, iteration_cap=10_000, keep_trace=False,
                           timing=False, debug=True, observer=cost)
    audited = audit.iterations == 10_000 and all(costs)
    ok = all(c >= 18 for c in per_instance) and audited
    report(8, ok, f"converged seeds per instance {per_instance} (need >= 18/20); "
                  f"debug audit {audit.iterations} steps, {len(costs)} balancing steps at O(deg) cost")


def test_criterion_9_lp():
    two = BalancingProblem.from_arcs(2, [(0, 1, 4.0), (1, 0, 1.0)])
    worst = 0.0
    for p in (2, 3):
        d = balance_lp(two, p, 1e-12).d
        scaled = np.diag(d) @ two.to_dense() @ np.diag(1 / d)
        norms = np.concatenate([np.linalg.norm(scaled, p, axis=1), np.linalg.norm(scaled, p, axis=0)])
        worst = max(worst, float(np.max(np.abs(norms - 2.0) / 2.0)), abs(d[1] / d[0] - 2.0) / 2.0)
    random_ok = True
    for k in range(5):
        problem = random_problem(12, 0.3, rng=5000 + k)
        for p in (2, 3):
            for variant in VARIANTS:
                res = balance_lp(problem, p, 0.05, variant, seed=k)
                state = BalanceState(power_problem(problem, p), p * np.log(res.d))
                random_ok &= res.report.converged and imbalance(state) <= 0.05 * (1 + 1e-9)
    report(9, worst <= 1e-9 and random_ok,
           f"2-cycle closed form max relative error {worst:.1e}; "
           f"random p-powered matrices eps-balanced: {random_ok}")


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
