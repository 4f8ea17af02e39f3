"""Command-line interface: ``balance``, ``verify``, ``lowerbound`` and ``bench``.

Exit codes: 0 success/converged, 2 iteration cap reached, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .errors import BalanceError
from .instances import random_problem
from .io import JsonlTraceSink, read_matrix_market, trace_header, write_diagonal
from .lp import VARIANTS, balance_lp, power_problem, run_variant
from .model import canonicalize
from .verify import (CycleProductMonitor, StepAuditor, check_gap_bound, lower_bound_instance,
                     oracle_balance, ratio_trajectory, sample_cycles)

log = logging.getLogger("balancekit")

EXIT_OK, EXIT_ERROR, EXIT_CAP = 0, 1, 2

_LOG_LEVELS = {"off": logging.CRITICAL + 10, "info": logging.INFO, "debug": logging.DEBUG}


def _configure_logging() -> None:
    level = os.environ.get("BALANCEKIT_LOG", "off").strip().lower()
    logging.basicConfig(level=_LOG_LEVELS.get(level, logging.CRITICAL + 10), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="balancekit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("balance", help="balance a Matrix Market file")
    b.add_argument("--input", required=True)
    b.add_argument("--variant", choices=VARIANTS, default="greedy")
    b.add_argument("--eps", type=_positive_float, required=True)
    b.add_argument("--p", type=int, default=1, help="balance in the Lp norm (integer >= 1)")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--max-iters", type=int, default=None,
                   help="cap on balancing steps (whole rounds for roundrobin)")
    b.add_argument("--precision-exp", type=int, default=10,
                   help="exponent k of the truncation radius for --variant random")
    b.add_argument("--trace", default=None, help="write a JSON-lines trace here")
    b.add_argument("--out", default=None, help="write the diagonal here (default: stdout)")
    b.add_argument("--timing", action="store_true", help="record wall time per step in the trace")

    v = sub.add_parser("verify", help="check invariants on a Matrix Market file")
    v.add_argument("--input", required=True)
    v.add_argument("--suite", choices=("all", "cycles", "gap", "lemma22"), default="all")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--steps", type=int, default=10_000, help="steps per instrumented run")

    lb = sub.add_parser("lowerbound", help="run the slow-convergence 4x4 instance")
    lb.add_argument("--eps", type=_positive_float, required=True)
    lb.add_argument("--variant", choices=VARIANTS, default="greedy")
    lb.add_argument("--seed", type=int, default=0)
    lb.add_argument("--max-iters", type=int, default=None)
    lb.add_argument("--points", type=int, default=50, help="trajectory samples to print")

    be = sub.add_parser("bench", help="time variants on random instances, CSV to stdout")
    be.add_argument("--sizes", type=int, nargs="+", required=True)
    be.add_argument("--eps", type=_positive_float, nargs="+", required=True)
    be.add_argument("--seeds", type=int, nargs="+", default=[0])
    be.add_argument("--variants", choices=VARIANTS, nargs="+", default=list(VARIANTS))
    be.add_argument("--density", type=float, default=0.2)
    be.add_argument("--max-iters", type=int, default=None)
    be.add_argument("--jobs", type=int, default=1)
    be.add_argument("--out", default=None, help="CSV path (default: stdout)")
    return parser


def _cmd_balance(args) -> int:
    base = canonicalize(read_matrix_market(args.input))
    sink = None
    if args.trace:
        digest_problem = base if args.p == 1 else power_problem(base, args.p)
        sink = JsonlTraceSink(args.trace, trace_header(
            digest_problem, args.variant, args.eps, args.seed, args.max_iters, p=args.p))
    try:
        result = balance_lp(base, args.p, args.eps, args.variant, seed=args.seed,
                            iteration_cap=args.max_iters, trace_sink=sink, k=args.precision_exp,
                            keep_trace=False, timing=args.timing)
    finally:
        if sink is not None:
            sink.close()
    report = result.report
    write_diagonal(args.out if args.out else sys.stdout, result.d)
    log.info("%s: %s after %d iterations", args.variant, report.terminated_by.value, report.iterations)
    if not report.converged:
        print(f"balancekit: iteration cap reached after {report.iterations} steps "
              f"(imbalance still above {args.eps:g})", file=sys.stderr)
        return EXIT_CAP
    return EXIT_OK


def _suite_cycles(problem, args) -> tuple[bool, str]:
    cycles = sample_cycles(problem, 20, args.seed)
    monitor = CycleProductMonitor(problem, cycles)
    run_variant(problem, 1e-300, "greedy", iteration_cap=args.steps,
                keep_trace=False, timing=False, observer=monitor)
    return monitor.ok, f"{len(cycles)} cycles over {monitor.checked} steps, " \
                       f"max log-deviation {monitor.max_deviation:.3g}"


def _suite_gap(problem, args) -> tuple[bool, str]:
    oracle = oracle_balance(problem, 1e-12, cap=10**7)
    rng = np.random.default_rng(args.seed)
    points = [np.zeros(problem.n)] + [rng.normal(size=problem.n) for _ in range(20)]
    checks = [check_gap_bound(problem, x, oracle) for x in points]
    worst = max(c.gap - c.bound for c in checks)
    return all(c.holds for c in checks), f"{len(checks)} points, max(gap - bound) = {worst:.3g}"


def _suite_decrease(problem, args) -> tuple[bool, str]:
    ok, details = True, []
    for variant in ("greedy", "roundrobin"):
        auditor = StepAuditor(problem, greedy=variant == "greedy")
        run_variant(problem, 1e-12, variant, iteration_cap=args.steps, trace_sink=auditor,
                    keep_trace=False, timing=False)
        ok &= auditor.ok
        details.append(f"{variant}: {auditor.steps} steps, max error {auditor.max_identity_error:.3g}")
        for line in auditor.failures[:3]:
            details.append(f"  {line}")
    return ok, "; ".join(details)


def _cmd_verify(args) -> int:
    problem = canonicalize(read_matrix_market(args.input))
    suites = {"cycles": _suite_cycles, "gap": _suite_gap, "lemma22": _suite_decrease}
    names = list(suites) if args.suite == "all" else [args.suite]
    all_ok = True
    for name in names:
        ok, detail = suites[name](problem, args)
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all_ok else EXIT_ERROR


def _cmd_lowerbound(args) -> int:
    inst = lower_bound_instance(args.eps)
    traj = ratio_trajectory(inst, args.variant, seed=args.seed, iteration_cap=args.max_iters)
    pts = traj.points
    if len(pts) > args.points:
        idx = np.unique(np.linspace(0, len(pts) - 1, args.points).round().astype(int))
        pts = [pts[k] for k in idx]
    out = {
        "eps": inst.eps, "beta": inst.beta, "variant": args.variant,
        "seed": args.seed if args.variant == "random" else None,
        "iterations": traj.iterations, "converged": traj.converged,
        "initial_ratio": traj.initial_ratio, "final_ratio": traj.final_ratio,
        "max_growth": traj.max_growth, "growth_bound": traj.growth_bound,
        "growth_holds": traj.growth_holds, "stopping_holds": traj.stopping_holds,
        "min_iterations": inst.min_iterations,
        "trajectory": [[t, r] for t, r in pts],
    }
    print(json.dumps(out))
    return EXIT_OK if traj.converged else EXIT_CAP


def _bench_one(job) -> dict:
    variant, n, eps, seed, density, cap = job
    problem = random_problem(n, density, rng=seed)
    started = time.perf_counter()
    report = run_variant(problem, eps, variant, seed=seed, iteration_cap=cap,
                         keep_trace=False, timing=False)
    wall = time.perf_counter() - started
    return {"variant": variant, "n": n, "m": problem.m, "w": problem.w, "eps": eps,
            "iterations": report.iterations, "wall_s": wall, "seed": seed,
            "terminated_by": report.terminated_by.value}


def _cmd_bench(args) -> int:
    jobs = [(v, n, e, s, args.density, args.max_iters)
            for n in args.sizes for e in args.eps for s in args.seeds for v in args.variants]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_bench_one, jobs))
    else:
        rows = [_bench_one(j) for j in jobs]
    fields = ["variant", "n", "m", "w", "eps", "iterations", "wall_s", "seed", "terminated_by"]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


_COMMANDS = {"balance": _cmd_balance, "verify": _cmd_verify,
             "lowerbound": _cmd_lowerbound, "bench": _cmd_bench}


def main(argv=None) -> int:
    _configure_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return _COMMANDS[args.command](args)
    except (BalanceError, ValueError, OSError) as exc:
        print(f"balancekit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
