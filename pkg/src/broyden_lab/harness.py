"""Run configured experiments, write CSV traces and bound reports, summarise."""

from __future__ import annotations

import csv
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .general import general_bound_report, minimize_oracle, shrink_to_locality, solve_general
from .oracle import OracleCheckError, SmoothOracle
from .problems import SpectrumSpec, SplitMix64, make_quadratic, random_logsumexp
from .quadratic import (
    GreedyComparison,
    QuadraticProblem,
    greedy_comparison,
    quadratic_bound_report,
    solve_greedy_bfgs,
    solve_quadratic,
    superlinear_activation,
)
from .schedule import parse_schedule
from .trace import BREAKDOWN, CONVERGED, BoundReport, SolverTrace

__all__ = [
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_VIOLATION",
    "EXIT_BREAKDOWN",
    "THREADS_ENV",
    "RunResult",
    "build_problem",
    "initial_point",
    "execute",
    "run",
    "report_summary",
    "write_trace_csv",
    "write_bounds_csv",
    "write_greedy_csv",
    "TRACE_COLUMNS",
]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VIOLATION = 2
EXIT_BREAKDOWN = 3

THREADS_ENV = "BROYDEN_LAB_THREADS"

TRACE_COLUMNS = ("k", "lambda", "theta", "sigma", "psi", "phi", "r", "xi",
                 "bound_linear", "bound_sigma", "bound_psi", "status")
BOUND_COLUMNS = ("k", "observed", "linear_bound", "superlinear_sigma_bound", "superlinear_psi_bound",
                 "greedy_bound", "checked", "violations")


def fmt(value) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(value), ".17g")


@dataclass
class RunResult:
    name: str
    trace: SolverTrace
    report: BoundReport


# --- problem and start construction ------------------------------------------

def build_problem(cfg: ExperimentConfig) -> QuadraticProblem | SmoothOracle:
    p = cfg.problem
    try:
        if p.kind == "quadratic":
            spec = SpectrumSpec(n=p.n, mu=p.mu, L=p.L, profile=p.profile, seed=p.seed,
                                eigenvalues=p.eigenvalues)
            return make_quadratic(spec)
        oracle, _, _ = random_logsumexp(p.n, p.m, p.mu, p.seed, scale=p.scale, M=p.M, L=p.L)
        return oracle
    except (ValueError, OracleCheckError) as exc:
        raise ConfigError(f"problem: {exc}") from None


def initial_point(cfg: ExperimentConfig, problem) -> np.ndarray:
    st, n = cfg.start, cfg.problem.n
    if st.x0 == "zero":
        return np.zeros(n)
    if st.x0 == "explicit":
        return np.array(st.values, dtype=float)
    seed = cfg.problem.seed if st.seed is None else st.seed
    offset = st.radius * SplitMix64(seed).normals(n)
    if st.x0 == "random":
        return offset
    x_star = minimize_oracle(problem)
    return shrink_to_locality(problem, x_star + offset, x_star)


# --- execution -------------------------------------------------------------

def _thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}: not an integer: {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{THREADS_ENV}: must be at least 1")
    return value


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9.]+", "_", label).strip("_") or "run"


def execute(cfg: ExperimentConfig) -> tuple[list[RunResult], GreedyComparison | None]:
    """Solve once per configured schedule, plus the greedy run when requested."""
    problem = build_problem(cfg)
    x0 = initial_point(cfg, problem)
    s = cfg.solver
    schedules = [parse_schedule(text) for text in s.phi]
    quadratic = isinstance(problem, QuadraticProblem)

    def one(schedule):
        if quadratic:
            trace = solve_quadratic(problem, x0, schedule, s.max_iter, s.tol, residual=s.residual)
            return trace, quadratic_bound_report(trace, problem=problem, greedy=cfg.compare.greedy)
        trace = solve_general(problem, x0, schedule, s.max_iter, s.tol, diagnostics=s.diagnostics,
                              quad_order=s.quad_order, residual=s.residual)
        return trace, general_bound_report(trace)

    jobs = [(sch.label, lambda sch=sch: one(sch)) for sch in schedules]
    if cfg.compare.greedy and quadratic:
        def greedy_job():
            trace = solve_greedy_bfgs(problem, x0, s.max_iter, s.tol)
            return trace, quadratic_bound_report(trace, problem=problem)
        jobs.append(("greedy", greedy_job))

    with ThreadPoolExecutor(max_workers=min(_thread_cap(), len(jobs))) as pool:
        outcomes = list(pool.map(lambda job: job[1](), jobs))

    results, seen = [], set()
    for (label, _), (trace, report) in zip(jobs, outcomes):
        name = f"{cfg.output.prefix}_{_slug(label)}"
        base, i = name, 2
        while name in seen:
            name, i = f"{base}_{i}", i + 1
        seen.add(name)
        results.append(RunResult(name, trace, report))

    comparison = None
    if cfg.compare.greedy:
        Q = cfg.compare.Q
        if Q is None:
            Q = problem.n * problem.L / problem.mu if quadratic else problem.dim * problem.L / problem.mu
        lam0 = results[0].trace.lambda0 if results else 1.0
        comparison = greedy_comparison(Q, lam0, cfg.compare.kmax)
    return results, comparison


# --- output ----------------------------------------------------------------

def write_trace_csv(path, trace: SolverTrace, report: BoundReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for i, rec in enumerate(trace.records):
            w.writerow([rec.k, fmt(rec.lam), fmt(rec.theta), fmt(rec.sigma), fmt(rec.psi), fmt(rec.phi),
                        fmt(rec.r), fmt(rec.xi), fmt(report.linear_bound[i]),
                        fmt(report.superlinear_sigma_bound[i]), fmt(report.superlinear_psi_bound[i]),
                        rec.status])


def write_bounds_csv(path, report: BoundReport) -> None:
    greedy = report.greedy_bound if report.greedy_bound is not None else np.full(len(report.k), math.nan)
    checked = report.checked if report.checked is not None else np.zeros(len(report.k), dtype=bool)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(BOUND_COLUMNS)
        for i, k in enumerate(report.k):
            names = ";".join(name for name, v in report.violations.items() if v[i])
            w.writerow([int(k), fmt(report.observed[i]), fmt(report.linear_bound[i]),
                        fmt(report.superlinear_sigma_bound[i]), fmt(report.superlinear_psi_bound[i]),
                        fmt(greedy[i]), int(bool(checked[i])), names])


def write_greedy_csv(path, comparison: GreedyComparison) -> None:
    A, B = comparison.A, comparison.B
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("k", "A", "B", "log_A", "log_B", "A_le_B"))
        for i, k in enumerate(comparison.k):
            w.writerow([int(k), fmt(A[i]), fmt(B[i]), fmt(comparison.log_A[i]), fmt(comparison.log_B[i]),
                        int(comparison.log_A[i] <= comparison.log_B[i])])


def _max_ratio(trace: SolverTrace, report: BoundReport | None) -> float:
    if report is None or report.checked is None:
        return math.nan
    mask = report.checked.copy()
    mask[0] = False
    if not np.any(mask):
        return math.nan
    lam = report.observed
    lin_obs = lam * trace.column("xi") if trace.kind == "general" else lam
    ratios = [lin_obs / report.linear_bound]
    if trace.kind != "greedy":
        ratios += [lam / report.superlinear_sigma_bound, lam / report.superlinear_psi_bound]
    if report.greedy_bound is not None:
        ratios.append(lam / report.greedy_bound)
    tightest = np.nanmax(np.vstack(ratios), axis=0)
    return float(np.max(tightest[mask]))


def report_summary(traces, reports=None) -> str:
    """Plain-text table, one row per trace.

    Columns: iterations to tolerance (``-`` when the run did not converge),
    the first ``k`` at which the superlinear bound is at most ``lambda_0``
    and the largest observed-to-bound ratio over checked iterations ``k >= 1``
    (at most 1 when every bound holds).
    """
    traces = list(traces)
    if not traces:
        raise ValueError("report_summary needs at least one trace")
    reports = list(reports) if reports is not None else [None] * len(traces)
    if len(reports) != len(traces):
        raise ValueError("need one report per trace")
    header = f"{'method':<24} {'kind':<10} {'status':<10} {'iters_to_tol':>12} {'activation_k':>12} {'max_ratio':>12}"
    rows = [header, "-" * len(header)]
    for trace, report in zip(traces, reports):
        iters = str(trace.iterations) if trace.status == CONVERGED else "-"
        act = None
        if trace.schedule is not None and trace.kind != "greedy":
            factor = 11.0 if trace.kind == "general" else 1.0
            act = superlinear_activation(trace.n, trace.mu, trace.L, trace.schedule, factor)
        act_s = "-" if act is None else str(act)
        ratio = _max_ratio(trace, report)
        label = trace.schedule_label if trace.kind != "greedy" else "greedy-bfgs"
        rows.append(f"{label:<24} {trace.kind:<10} {trace.status:<10} {iters:>12} {act_s:>12} {ratio:>12.6g}")
    return "\n".join(rows)


def _comparison_text(comparison: GreedyComparison) -> str:
    cross = comparison.first_crossover()
    return (f"greedy vs classical: Q = {comparison.Q:.6g}, K = {comparison.K:.6f}, "
            f"first k with A_k <= B_k = {cross if cross is not None else '-'}, "
            f"A_k <= B_k for all k >= ceil(K) up to {int(comparison.k[-1])}: "
            f"{'yes' if comparison.holds_after_K() else 'no'}")


def run(cfg: ExperimentConfig, out_dir=None, stream=None) -> int:
    """Execute ``cfg``, write outputs under ``out_dir`` and return the exit code.

    Breakdown (3) takes precedence over bound violations (2).
    """
    stream = stream or sys.stdout
    try:
        results, comparison = execute(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir if out_dir is not None else cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    for res in results:
        write_trace_csv(out / f"{res.name}_trace.csv", res.trace, res.report)
        write_bounds_csv(out / f"{res.name}_bounds.csv", res.report)
    text = report_summary([r.trace for r in results], [r.report for r in results])
    if comparison is not None:
        write_greedy_csv(out / f"{cfg.output.prefix}_greedy_comparison.csv", comparison)
        text += "\n" + _comparison_text(comparison)
    (out / f"{cfg.output.prefix}_summary.txt").write_text(text + "\n", encoding="utf-8")
    print(text, file=stream)

    if any(r.trace.status == BREAKDOWN for r in results):
        for r in results:
            if r.trace.status == BREAKDOWN:
                print(f"breakdown in {r.name}: {r.trace.message}", file=sys.stderr)
        return EXIT_BREAKDOWN
    bad = [(r.name, r.report.violated()) for r in results if not r.report.ok]
    if comparison is not None and not comparison.holds_after_K():
        bad.append(("greedy_comparison", ["A_k <= B_k after K"]))
    if bad:
        for name, which in bad:
            print(f"bound violation in {name}: {', '.join(which)}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK
