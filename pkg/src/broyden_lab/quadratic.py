"""Quasi-Newton scheme with unit steps for strongly convex quadratics.

The iteration is ``x_{k+1} = x_k - G_k^{-1} grad f(x_k)`` started from
``G_0 = L B``, with ``G_{k+1}`` a convex Broyden update along
``u_k = x_{k+1} - x_k``. Steps use the inverse ``H_k`` updated in O(n^2);
a directly updated copy of ``G_k`` is kept alongside for the potentials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .broyden import (
    DegenerateCurvatureError,
    NumericalBreakdownError,
    broyden_update,
    inverse_broyden_update,
    psi_potential,
    sigma_potential,
    theta_from_products,
)
from .linops import SpdOperator, _vec, as_spd, extreme_relative_eigenvalues, norm_dual, relative_eigenvalues
from .schedule import PhiSchedule
from .trace import (
    BREAKDOWN,
    CONVERGED,
    MAX_ITER,
    BoundReport,
    IterRecord,
    SolverTrace,
    safe_exp,
)

__all__ = [
    "QuadraticProblem",
    "lambda_quad",
    "solve_quadratic",
    "solve_greedy_bfgs",
    "bound_linear",
    "bound_superlinear_sigma",
    "bound_superlinear_psi",
    "log_bound_superlinear",
    "superlinear_activation",
    "reference_basis",
    "greedy_direction",
    "GreedyComparison",
    "greedy_comparison",
    "greedy_K",
    "quadratic_bound_report",
]

SANDWICH_SLACK = 1e-9


@dataclass(frozen=True)
class QuadraticProblem:
    """``f(x) = <Ax, x>/2 - <b, x>`` with ``mu B <= A <= L B``."""

    A: SpdOperator
    b: np.ndarray
    mu: float
    L: float
    B: SpdOperator | None = None

    def __post_init__(self):
        a = as_spd(self.A)
        object.__setattr__(self, "A", a)
        b = np.array(_vec(self.b, a.dim), dtype=float)
        b.flags.writeable = False
        object.__setattr__(self, "b", b)
        ref = SpdOperator(np.eye(a.dim)) if self.B is None else as_spd(self.B)
        if ref.dim != a.dim:
            raise ValueError("reference operator B has the wrong dimension")
        object.__setattr__(self, "B", ref)
        mu, L = float(self.mu), float(self.L)
        if not (0.0 < mu <= L):
            raise ValueError(f"need 0 < mu <= L, got mu={mu}, L={L}")
        lo, hi = extreme_relative_eigenvalues(a, ref)
        if lo < mu * (1.0 - SANDWICH_SLACK) or hi > L * (1.0 + SANDWICH_SLACK):
            raise ValueError(
                f"relative spectrum [{lo:.6g}, {hi:.6g}] of A is not inside [mu, L] = [{mu:.6g}, {L:.6g}]"
            )

    @property
    def n(self) -> int:
        return self.A.dim

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ (self.A @ x)) - float(self.b @ x)

    def gradient(self, x) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float) - self.b

    def minimizer(self) -> np.ndarray:
        return self.A.solve(self.b)


def lambda_quad(problem: QuadraticProblem, x) -> float:
    """Gradient norm measured in the metric of ``A^{-1}``."""
    return norm_dual(problem.A, problem.gradient(_vec(x, problem.n)))


# --- rate bounds -----------------------------------------------------------

def bound_linear(k: int, mu: float, L: float, lambda0: float) -> float:
    if not 0.0 < mu <= L:
        raise ValueError("need 0 < mu <= L")
    return (1.0 - mu / L) ** k * lambda0


def _log_pfactor(mu: float, L: float, phis) -> float:
    p = np.asarray(phis, dtype=float) * (mu / L) + 1.0 - np.asarray(phis, dtype=float)
    return -0.5 * float(np.sum(np.log(p)))


def log_bound_superlinear(k: int, n: int, mu: float, L: float, phis, factor: float = 1.0) -> float:
    """Natural log of ``prod(p_i)^{-1/2} (factor n L / (mu k))^{k/2}``."""
    if k < 1:
        raise ValueError("superlinear bounds need k >= 1")
    if not 0.0 < mu <= L:
        raise ValueError("need 0 < mu <= L")
    if len(phis) < k:
        raise ValueError(f"need {k} phi values, got {len(phis)}")
    phis = list(phis)[:k]
    return _log_pfactor(mu, L, phis) + 0.5 * k * math.log(factor * n * L / (mu * k))


def _log_bounds_superlinear(kmax: int, n: int, mu: float, L: float, phis, factor: float = 1.0) -> np.ndarray:
    """:func:`log_bound_superlinear` for every ``k = 1..kmax`` in one pass."""
    if kmax < 1:
        return np.zeros(0)
    phi = np.asarray(list(phis)[:kmax], dtype=float)
    ks = np.arange(1, kmax + 1, dtype=float)
    logp = -0.5 * np.cumsum(np.log(phi * (mu / L) + 1.0 - phi))
    return logp + 0.5 * ks * np.log(factor * n * L / (mu * ks))


def bound_superlinear_sigma(k: int, n: int, mu: float, L: float, phis, lambda0: float) -> float:
    return float(safe_exp(log_bound_superlinear(k, n, mu, L, phis))) * lambda0


def bound_superlinear_psi(k: int, n: int, mu: float, L: float, phis, lambda0: float) -> float:
    return float(safe_exp(log_bound_superlinear(k, n, mu, L, phis, 4.0))) * lambda0


def superlinear_activation(n: int, mu: float, L: float, schedule: PhiSchedule,
                           factor: float = 1.0, k_max: int = 1_000_000) -> int | None:
    """Smallest ``k >= 1`` at which the superlinear bound is at most ``lambda_0``.

    For a constant ``phi`` this is ``ceil(factor n L / (mu p))``. Returns None
    if it does not happen by ``k_max`` or a list schedule runs out first.
    """
    c = factor * n * L / mu
    if schedule.constant_value is not None:
        phi = schedule.constant_value
        k = max(1, math.ceil(c / (phi * mu / L + 1.0 - phi)))
        return k if k <= k_max else None
    log_p = 0.0
    for k in range(1, k_max + 1):
        try:
            phi = schedule(k - 1)
        except IndexError:
            return None
        log_p += math.log(phi * mu / L + 1.0 - phi)
        if -0.5 * log_p + 0.5 * k * math.log(c / k) <= 0.0:
            return k
    return None


# --- greedy comparison -----------------------------------------------------

def reference_basis(B) -> list[np.ndarray]:
    """Basis ``e_1..e_n`` with ``B^{-1} = sum e_i e_i*``; the unit vectors for ``B = I``."""
    B = as_spd(B)
    m = B.matrix
    if np.array_equal(m, np.eye(B.dim)):
        return list(np.eye(B.dim))
    # columns of C^{-T}, B = C C^T
    e = np.linalg.inv(B.cholesky).T
    return [e[:, i].copy() for i in range(B.dim)]


def greedy_direction(G, A, basis=None) -> np.ndarray:
    """Basis vector maximising ``<Gu,u>/<Au,u>``; lowest index wins ties."""
    G, A = as_spd(G), as_spd(A)
    if basis is None:
        basis = list(np.eye(A.dim))
    if len(basis) == 0:
        raise ValueError("empty basis")
    E = np.column_stack(basis)
    ratios = np.einsum("ij,ij->j", E, G.matrix @ E) / np.einsum("ij,ij->j", E, A.matrix @ E)
    return E[:, int(np.argmax(ratios))].copy()


def greedy_K(Q: float) -> float:
    """Iteration after which the greedy BFGS rate beats the classical one."""
    if Q < 1:
        raise ValueError("Q must be >= 1")
    return 1.0 + 6.0 * Q * math.log(4.0 * Q)


@dataclass
class GreedyComparison:
    k: np.ndarray
    log_A: np.ndarray
    log_B: np.ndarray
    K: float
    lambda0: float
    Q: float = math.nan

    @property
    def A(self) -> np.ndarray:
        return safe_exp(self.log_A) * self.lambda0

    @property
    def B(self) -> np.ndarray:
        return safe_exp(self.log_B) * self.lambda0

    def first_crossover(self) -> int | None:
        """Smallest ``k`` with ``A_k <= B_k``."""
        hit = np.nonzero(self.log_A <= self.log_B)[0]
        return int(self.k[hit[0]]) if hit.size else None

    def holds_after_K(self) -> bool:
        """``A_k <= B_k`` for every computed ``k >= ceil(K)``."""
        mask = self.k >= math.ceil(self.K)
        return bool(np.all(self.log_A[mask] <= self.log_B[mask]))


def greedy_comparison(Q: float, lambda0: float, kmax: int) -> GreedyComparison:
    """Greedy BFGS rate ``A_k`` against classical BFGS ``B_k`` for ``k = 1..kmax``.

    Both are kept as logarithms of ``value / lambda0`` since ``Q^k`` overflows
    long before the comparison becomes interesting.
    """
    Q = float(Q)
    K = greedy_K(Q)
    k = np.arange(1, int(kmax) + 1, dtype=float)
    log_A = -k * (k - 1.0) / (2.0 * Q) + k * math.log(Q)
    log_B = 0.5 * k * (math.log(Q) - np.log(k))
    return GreedyComparison(k.astype(int), log_A, log_B, K, float(lambda0), Q)


# --- the scheme ------------------------------------------------------------

def solve_quadratic(problem: QuadraticProblem, x0=None, schedule: PhiSchedule | None = None,
                    max_iter: int = 1000, tol: float = 1e-12, residual: str = "recurrence") -> SolverTrace:
    """Run the scheme until ``lambda_k <= tol * lambda_0`` or ``max_iter`` steps.

    ``schedule`` defaults to BFGS. A breakdown of the update ends the run with
    status ``"breakdown"``.

    With ``residual="recurrence"`` the gradient is carried as
    ``g_{k+1} = g_k + A u_k``; ``"direct"`` recomputes ``A x_{k+1} - b``,
    whose roundoff (about ``eps * |b|``) swamps ``lambda_k`` well before the
    iterates stop improving.
    """
    return _run(problem, x0, schedule, max_iter, tol, greedy=False, residual=residual)


def solve_greedy_bfgs(problem: QuadraticProblem, x0=None, max_iter: int = 1000,
                      tol: float = 1e-12) -> SolverTrace:
    """BFGS steps with the update direction picked greedily from the basis of ``B``."""
    return _run(problem, x0, PhiSchedule.constant(0.0), max_iter, tol, greedy=True)


def _run(problem, x0, schedule, max_iter, tol, greedy, residual="recurrence"):
    if max_iter < 0 or tol < 0:
        raise ValueError("max_iter and tol must be non-negative")
    if residual not in ("recurrence", "direct"):
        raise ValueError(f"unknown residual mode {residual!r}")
    schedule = schedule or PhiSchedule.constant(0.0)
    A, b, n = problem.A, problem.b, problem.n
    x = np.zeros(n) if x0 is None else np.array(_vec(x0, n), dtype=float)
    basis = reference_basis(problem.B) if greedy else None

    G = problem.L * problem.B
    H = SpdOperator(problem.B.inv() / problem.L, check=False).matrix
    trace = SolverTrace(
        kind="greedy" if greedy else "quadratic",
        n=n, mu=problem.mu, L=problem.L, schedule_label=schedule.label, schedule=schedule,
    )

    g = A @ x - b
    lam = norm_dual(A, g)
    lam0 = lam
    k = 0
    while True:
        lo, hi = extreme_relative_eigenvalues(G, A)
        rec = IterRecord(k=k, x=x.copy(), lam=lam, sigma=sigma_potential(A, G),
                         psi=psi_potential(A, G), rel_min=lo, rel_max=hi)
        trace.records.append(rec)
        if lam <= tol * lam0:
            rec.status = trace.status = CONVERGED
            break
        if k >= max_iter:
            rec.status = trace.status = MAX_ITER
            break

        phi = schedule(k)
        step = -(H @ g)
        if greedy:
            u = greedy_direction(G, A, basis)
            gu = G @ u
        else:
            u = step
            gu = -g
        au = A @ u
        rec.phi = phi
        rec.r = float(np.sqrt(max(u @ au, 0.0)))
        try:
            # theta from the directly updated G, independent of the H used for the step
            rec.theta = theta_from_products(A, G @ u, au)
            H = inverse_broyden_update(H, u, au, phi, gu).matrix
            G = broyden_update(G, u, au, phi)
        except (DegenerateCurvatureError, NumericalBreakdownError) as exc:
            rec.status = trace.status = BREAKDOWN
            trace.message = str(exc)
            break

        x = x + step
        if residual == "recurrence":
            g = g + A @ step
        else:
            g = A @ x - b
        lam = norm_dual(A, g)
        k += 1

    trace.H = H
    trace.G = G.matrix
    return trace


def quadratic_bound_report(trace: SolverTrace, rtol: float = 1e-8, problem: QuadraticProblem | None = None,
                           greedy: bool = False) -> BoundReport:
    """Evaluate the linear and both superlinear bounds along a quadratic trace.

    Violations are only flagged above the roundoff floor. Greedy traces are
    checked against the linear bound, the cumulative greedy bound and the
    per-step recurrence ``lambda_{k+1} <= (1 - 1/Q)^k Q lambda_k``; the
    superlinear bounds are still evaluated but belong to the classical
    directions and are not asserted there. With ``problem``
    given, the eigenvalue-dependent factor ``sum(L/lambda_i - 1)`` is reported
    too (diagnostic only).
    """
    lam = trace.lambdas
    lam0 = trace.lambda0
    ks = np.arange(len(lam))
    phis = trace.phis
    n, mu, L = trace.n, trace.mu, trace.L
    linear = np.array([bound_linear(k, mu, L, lam0) for k in ks])
    log_sig = _log_bounds_superlinear(len(lam) - 1, n, mu, L, phis)
    with np.errstate(over="ignore"):
        sig = np.concatenate(([lam0], safe_exp(log_sig) * lam0))
        psi = np.concatenate(([lam0], safe_exp(log_sig + 0.5 * ks[1:] * math.log(4.0)) * lam0))
    checked = trace.above_floor() if lam0 > 0 else np.zeros(len(lam), dtype=bool)
    slack = 1.0 + rtol
    viol = {"linear": checked & (lam > linear * slack)}
    if trace.kind != "greedy":
        viol["superlinear_sigma"] = checked & (lam > sig * slack)
        viol["superlinear_psi"] = checked & (lam > psi * slack)
    greedy_arr = None
    if greedy or trace.kind == "greedy":
        Q = n * L / mu
        with np.errstate(over="ignore"):
            greedy_arr = safe_exp(-ks * (ks - 1.0) / (2.0 * Q) + ks * math.log(Q)) * lam0
        viol["greedy"] = checked & (lam > greedy_arr * slack)
    if trace.kind == "greedy":
        step = np.zeros(len(lam), dtype=bool)
        factor = (1.0 - 1.0 / Q) ** ks[:-1] * Q
        step[1:] = checked[1:] & (lam[1:] > factor * lam[:-1] * slack)
        viol["greedy_step"] = step
    spectral = None
    if problem is not None:
        lam_rel = relative_eigenvalues(problem.A, problem.B)
        spectral = float(np.sum(problem.L / lam_rel - 1.0))
    return BoundReport(
        k=ks, observed=lam, linear_bound=linear, superlinear_sigma_bound=sig,
        superlinear_psi_bound=psi, greedy_bound=greedy_arr, checked=checked,
        violations=viol, spectral_factor=spectral,
    )
