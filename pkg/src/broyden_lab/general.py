"""Quasi-Newton scheme for strongly convex, strongly self-concordant functions.

Same unit-step iteration as the quadratic case, but the update target is the
integral Hessian ``J_k`` of the step, which the update only needs through
the gradient difference ``J_k u_k = grad f(x_{k+1}) - grad f(x_k)``. With
``diagnostics=True`` the solver also builds ``J_k`` by Gauss-Legendre
quadrature and records the closeness measure and potentials against it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .broyden import (
    DegenerateCurvatureError,
    NumericalBreakdownError,
    broyden_update,
    inverse_broyden_update,
    psi_potential,
    sigma_potential,
    theta_from_products,
)
from .linops import SpdOperator, _vec, extreme_relative_eigenvalues, norm_dual, norm_primal
from .oracle import SmoothOracle
from .quadratic import _log_bounds_superlinear, log_bound_superlinear
from .schedule import PhiSchedule
from .trace import BREAKDOWN, CONVERGED, MAX_ITER, BoundReport, IterRecord, SolverTrace, safe_exp

__all__ = [
    "secant_product",
    "integral_hessian",
    "lambda_local",
    "Locality",
    "check_locality",
    "locality_threshold",
    "solve_general",
    "bound_general_superlinear",
    "HessianRelations",
    "check_hessian_relations",
    "estimate_self_concordance",
    "minimize_oracle",
    "shrink_to_locality",
    "general_bound_report",
]

LOCALITY_CONST = math.log(1.5) / 4.0
XI_MAX = math.sqrt(1.5)


def secant_product(grad_next, grad_prev) -> np.ndarray:
    grad_next = np.asarray(grad_next, dtype=float)
    grad_prev = np.asarray(grad_prev, dtype=float)
    if grad_next.shape != grad_prev.shape:
        raise ValueError("gradients have different shapes")
    return grad_next - grad_prev


def integral_hessian(oracle: SmoothOracle, x, u, quad_order: int = 16) -> SpdOperator:
    """Gauss-Legendre approximation of ``int_0^1 hess f(x + t u) dt``."""
    if quad_order < 1:
        raise ValueError("quad_order must be at least 1")
    x = _vec(x, oracle.dim)
    u = _vec(u, oracle.dim)
    nodes, weights = np.polynomial.legendre.leggauss(quad_order)
    t = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    acc = np.zeros((oracle.dim, oracle.dim))
    for ti, wi in zip(t, w):
        acc += wi * oracle.hessian(x + ti * u).matrix
    return SpdOperator(0.5 * (acc + acc.T))


def lambda_local(oracle: SmoothOracle, x) -> float:
    """Gradient norm in the metric of the inverse Hessian at ``x``."""
    x = _vec(x, oracle.dim)
    return norm_dual(oracle.hessian(x), oracle.gradient(x))


def locality_threshold(mu: float, L: float) -> float:
    return LOCALITY_CONST * mu / L


@dataclass(frozen=True)
class Locality:
    ok: bool
    margin: float
    lhs: float
    rhs: float


def check_locality(oracle: SmoothOracle, x0) -> Locality:
    """Whether ``M lambda(x0) <= (ln 1.5 / 4)(mu / L)``; margin is rhs - lhs."""
    lhs = oracle.M * lambda_local(oracle, x0)
    rhs = locality_threshold(oracle.mu, oracle.L)
    return Locality(lhs <= rhs, rhs - lhs, lhs, rhs)


def bound_general_superlinear(k: int, n: int, mu: float, L: float, phis, lambda0: float) -> float:
    return float(safe_exp(log_bound_superlinear(k, n, mu, L, phis, 11.0))) * lambda0


def solve_general(oracle: SmoothOracle, x0, schedule: PhiSchedule | None = None, max_iter: int = 100,
                  tol: float = 1e-12, diagnostics: bool = False, quad_order: int = 16,
                  residual: str = "recurrence") -> SolverTrace:
    """Run the scheme from ``x0`` with ``G_0 = L B``.

    The trace is flagged ``in_theory=False`` when ``x0`` fails the locality
    condition; the run proceeds anyway. Non-positive curvature along a step
    ends the run with status ``"breakdown"``.

    With ``residual="recurrence"`` the gradient is carried forward as
    ``g_{k+1} = g_k + oracle.gradient_difference(x_k, u_k)``, which keeps its
    error proportional to ``eps * lambda_0`` instead of ``eps * |grad f|``.
    ``residual="direct"`` re-evaluates the gradient at every iterate and
    forms the secant with :func:`secant_product`.
    """
    if max_iter < 0 or tol < 0:
        raise ValueError("max_iter and tol must be non-negative")
    if residual not in ("recurrence", "direct"):
        raise ValueError(f"residual must be 'recurrence' or 'direct', got {residual!r}")
    schedule = schedule or PhiSchedule.constant(0.0)
    n, mu, L, M = oracle.dim, oracle.mu, oracle.L, oracle.M
    x = np.array(_vec(x0, n), dtype=float)

    H = oracle.B.inv() / L
    G = L * oracle.B if diagnostics else None
    trace = SolverTrace(kind="general", n=n, mu=mu, L=L, M=M, schedule_label=schedule.label,
                        schedule=schedule)

    g = oracle.gradient(x)
    hess = oracle.hessian(x)
    lam = norm_dual(hess, g)
    lam0 = lam
    trace.in_theory = M * lam0 <= locality_threshold(mu, L)
    sum_r = 0.0
    k = 0
    while True:
        rec = IterRecord(k=k, x=x.copy(), lam=lam, xi=float(safe_exp(M * sum_r)))
        trace.records.append(rec)
        if diagnostics:
            rec.rel_min, rec.rel_max = extreme_relative_eigenvalues(G, hess)
        if lam <= tol * lam0:
            rec.status = trace.status = CONVERGED
            break
        if k >= max_iter:
            rec.status = trace.status = MAX_ITER
            break

        phi = schedule(k)
        rec.phi = phi
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                u = -(H @ g)
                x_next = x + u
                if residual == "recurrence":
                    ju = oracle.gradient_difference(x, u)
                    g_next = g + ju
                else:
                    g_next = oracle.gradient(x_next)
                    ju = secant_product(g_next, g)
            if not (np.all(np.isfinite(x_next)) and np.all(np.isfinite(g_next))):
                raise NumericalBreakdownError("iterate or gradient is no longer finite")
            rec.r = norm_primal(hess, u)
            if diagnostics:
                J = integral_hessian(oracle, x, u, quad_order)
                rec.theta = theta_from_products(J, G @ u, J @ u)
                rec.sigma = sigma_potential(J, G)
                rec.psi = psi_potential(J, G)
                rec.j_rel_min, rec.j_rel_max = extreme_relative_eigenvalues(G, J)
                G = broyden_update(G, u, ju, phi)
            H = inverse_broyden_update(H, u, ju, phi, -g).matrix
            hess_next = oracle.hessian(x_next)
            lam_next = norm_dual(hess_next, g_next)
        except (DegenerateCurvatureError, NumericalBreakdownError, np.linalg.LinAlgError) as exc:
            rec.status = trace.status = BREAKDOWN
            trace.message = str(exc)
            break

        sum_r += rec.r
        x, g, hess, lam = x_next, g_next, hess_next, lam_next
        k += 1

    trace.H = H
    trace.G = None if G is None else G.matrix
    return trace


@dataclass(frozen=True)
class HessianRelations:
    """Worst violations of the three Hessian sandwiches between ``x`` and ``y``.

    Each violation is how far a relative eigenvalue falls outside its
    allowed interval (0 when the sandwich holds).
    """

    r: float
    hess_xy: float
    j_x: float
    j_y: float

    @property
    def worst(self) -> float:
        return max(self.hess_xy, self.j_x, self.j_y)


def _sandwich_violation(inner, outer, c: float) -> float:
    lo, hi = extreme_relative_eigenvalues(inner, outer)
    return max(0.0, 1.0 / c - lo, hi - c)


def check_hessian_relations(oracle: SmoothOracle, x, y, quad_order: int = 16) -> HessianRelations:
    x = _vec(x, oracle.dim)
    y = _vec(y, oracle.dim)
    hx = oracle.hessian(x)
    hy = oracle.hessian(y)
    r = norm_primal(hx, y - x)
    J = integral_hessian(oracle, x, y - x, quad_order)
    c_full = 1.0 + oracle.M * r
    c_half = 1.0 + 0.5 * oracle.M * r
    return HessianRelations(
        r=r,
        hess_xy=_sandwich_violation(hy, hx, c_full),
        j_x=_sandwich_violation(J, hx, c_half),
        j_y=_sandwich_violation(J, hy, c_half),
    )


def estimate_self_concordance(oracle: SmoothOracle, center, radius: float = 1.0, samples: int = 200,
                              seed: int = 0) -> float:
    """Empirical lower bound on the strong self-concordance constant.

    Samples ``x, y, z, w`` uniformly in a box around ``center`` and returns the
    largest ``lambda_max(hess(y) - hess(x), hess(w)) / |y - x|_z`` seen.
    """
    from .problems import SplitMix64

    rng = SplitMix64(seed)
    center = _vec(center, oracle.dim)
    best = 0.0
    for _ in range(samples):
        x, y, z, w = (center + radius * (2.0 * rng.uniforms(oracle.dim) - 1.0) for _ in range(4))
        dist = norm_primal(oracle.hessian(z), y - x)
        if dist == 0.0:
            continue
        diff = oracle.hessian(y).matrix - oracle.hessian(x).matrix
        _, hi = extreme_relative_eigenvalues(diff, oracle.hessian(w))
        best = max(best, hi / dist)
    return best


def minimize_oracle(oracle: SmoothOracle, x0=None, newton_polish: int = 3) -> np.ndarray:
    """High-accuracy minimiser: trust-region Newton, then a few pure Newton steps."""
    x0 = np.zeros(oracle.dim) if x0 is None else _vec(x0, oracle.dim)
    res = scipy.optimize.minimize(
        oracle.value, x0, jac=oracle.gradient, hess=lambda x: oracle.hessian(x).matrix,
        method="trust-exact", options={"gtol": 1e-12},
    )
    x = res.x
    for _ in range(newton_polish):
        x = x - oracle.hessian(x).solve(oracle.gradient(x))
    return x


def shrink_to_locality(oracle: SmoothOracle, x_far, x_star, factor: float = 0.5,
                       max_halvings: int = 200) -> np.ndarray:
    """Move ``x_far`` toward ``x_star`` by ``factor`` until the locality check passes."""
    x_far = _vec(x_far, oracle.dim)
    x_star = _vec(x_star, oracle.dim)
    t = 1.0
    for _ in range(max_halvings):
        x = x_star + t * (x_far - x_star)
        if check_locality(oracle, x).ok:
            return x
        t *= factor
    raise RuntimeError("could not reach the locality region")


def general_bound_report(trace: SolverTrace, rtol: float = 1e-6, step_rtol: float = 1e-7,
                         sandwich_slack: float = 1e-9) -> BoundReport:
    """Rate bounds for a general trace; asserted only for in-theory traces.

    ``linear_bound`` is ``(1 - mu/(2L))^k lambda_0`` and is compared with
    ``xi_k lambda_k``; ``superlinear_psi_bound`` holds the general
    superlinear bound. There is no trace-potential bound for this scheme, so
    ``superlinear_sigma_bound`` is NaN. Diagnostic traces additionally get the
    operator sandwich, the cap on ``xi``, the one-step inequality and
    ``r_k <= xi_k lambda_k``.
    """
    lam = trace.lambdas
    lam0 = trace.lambda0
    ks = np.arange(len(lam))
    n, mu, L, M = trace.n, trace.mu, trace.L, trace.M
    xi = trace.column("xi")
    phis = trace.phis
    linear = (1.0 - mu / (2.0 * L)) ** ks * lam0
    with np.errstate(over="ignore"):
        sup = np.concatenate(([lam0], safe_exp(_log_bounds_superlinear(len(lam) - 1, n, mu, L, phis, 11.0)) * lam0))
    checked = trace.above_floor() & trace.in_theory if lam0 > 0 else np.zeros(len(lam), dtype=bool)
    viol = {
        "linear": checked & (xi * lam > linear * (1.0 + rtol)),
        "superlinear": checked & (lam > sup * (1.0 + rtol)),
        "xi": checked & (xi > XI_MAX + sandwich_slack),
    }
    r = trace.column("r")
    has_r = ~np.isnan(r)
    viol["r_via_lambda"] = checked & has_r & (np.where(has_r, r, 0.0) > xi * lam * (1.0 + step_rtol))
    rel_min, rel_max = trace.column("rel_min"), trace.column("rel_max")
    if not np.all(np.isnan(rel_min)):
        lo_ok = rel_min >= (1.0 / xi) * (1.0 - sandwich_slack)
        hi_ok = rel_max <= xi * (L / mu) * (1.0 + sandwich_slack)
        viol["sandwich"] = checked & ~(lo_ok & hi_ok)
    theta = trace.column("theta")
    if not np.all(np.isnan(theta)):
        step = np.zeros(len(lam), dtype=bool)
        for k in range(len(lam) - 1):
            if checked[k] and checked[k + 1] and not np.isnan(theta[k]):
                bound = (1.0 + 0.5 * M * r[k]) * theta[k] * lam[k]
                step[k] = lam[k + 1] > bound * (1.0 + step_rtol)
        viol["one_step"] = step
    return BoundReport(
        k=ks, observed=lam, linear_bound=linear, superlinear_sigma_bound=np.full(len(lam), np.nan),
        superlinear_psi_bound=sup, checked=checked, violations=viol,
    )
