import math

import numpy as np
import pytest

from broyden_lab.linops import norm_dual
from broyden_lab.problems import SpectrumSpec, make_quadratic
from broyden_lab.quadratic import (
    QuadraticProblem,
    bound_linear,
    bound_superlinear_psi,
    bound_superlinear_sigma,
    greedy_comparison,
    greedy_direction,
    greedy_K,
    lambda_quad,
    quadratic_bound_report,
    reference_basis,
    solve_greedy_bfgs,
    solve_quadratic,
    superlinear_activation,
)
from broyden_lab.schedule import PhiSchedule
from broyden_lab.trace import fp_floor

SCHEDULES = [PhiSchedule.constant(0.0), PhiSchedule.constant(1.0), PhiSchedule.constant(0.5),
             PhiSchedule.alternating()]


def problem(n=10, L=10.0, seed=0, profile="log-uniform"):
    return make_quadratic(SpectrumSpec(n=n, mu=1.0, L=L, profile=profile, seed=seed))


class TestProblem:
    def test_rejects_spectrum_outside(self):
        with pytest.raises(ValueError, match="mu, L"):
            QuadraticProblem(np.diag([1.0, 5.0]), np.zeros(2), 2.0, 5.0)
        with pytest.raises(ValueError):
            QuadraticProblem(np.eye(2), np.zeros(2), 2.0, 1.0)

    def test_accepts_boundary_with_slack(self):
        QuadraticProblem(np.diag([1.0, 5.0 * (1 + 1e-12)]), np.zeros(2), 1.0, 5.0)

    def test_reference_operator(self):
        B = np.diag([1.0, 4.0])
        p = QuadraticProblem(np.diag([2.0, 8.0]), np.zeros(2), 2.0, 2.0, B)
        assert p.n == 2

    def test_value_gradient(self, rng):
        p = problem(5)
        x = rng.standard_normal(5)
        assert np.allclose(p.gradient(x), p.A.matrix @ x - p.b)
        assert np.allclose(p.gradient(p.minimizer()), 0, atol=1e-12)


class TestLambda:
    def test_minimizer(self):
        p = problem(6)
        assert lambda_quad(p, p.minimizer()) == pytest.approx(0.0, abs=1e-12)

    def test_scalar(self):
        p = QuadraticProblem(np.array([[4.0]]), np.zeros(1), 4.0, 4.0)
        assert lambda_quad(p, np.array([1.0])) == pytest.approx(2.0)

    def test_matches_norm_dual(self, rng):
        p = problem(6)
        x = rng.standard_normal(6)
        assert lambda_quad(p, x) == norm_dual(p.A, p.gradient(x))


class TestBounds:
    def test_linear(self):
        assert bound_linear(0, 1.0, 3.0, 5.0) == 5.0
        assert bound_linear(3, 1.0, 1.0, 5.0) == 0.0
        assert bound_linear(3, 1.0, 2.0, 8.0) == pytest.approx(1.0)

    def test_sigma_examples(self):
        assert bound_superlinear_sigma(4, 2, 1.0, 2.0, [0.0] * 4, 3.0) == pytest.approx(3.0)
        n, mu, L, k = 3, 1.0, 5.0, 6
        assert bound_superlinear_sigma(k, n, mu, L, [1.0] * k, 1.0) == pytest.approx(
            (n * L ** 2 / (mu ** 2 * k)) ** (k / 2))
        assert bound_superlinear_sigma(k, n, mu, L, [0.0] * k, 1.0) == pytest.approx(
            (n * L / (mu * k)) ** (k / 2))

    def test_psi_examples(self):
        phis = [0.3, 0.9, 0.1, 0.0, 1.0]
        for k in range(1, 6):
            ratio = bound_superlinear_psi(k, 4, 1.0, 7.0, phis, 1.0) / bound_superlinear_sigma(k, 4, 1.0, 7.0, phis, 1.0)
            assert ratio == pytest.approx(2.0 ** k)
        assert bound_superlinear_psi(4, 1, 1.0, 1.0, [0.0] * 4, 1.0) == pytest.approx(1.0)
        assert bound_superlinear_psi(2, 1, 1.0, 2.0, [1.0] * 2, 1.0) == pytest.approx(8.0)

    def test_needs_enough_phis(self):
        with pytest.raises(ValueError):
            bound_superlinear_sigma(3, 1, 1.0, 2.0, [0.0], 1.0)
        with pytest.raises(ValueError):
            bound_superlinear_sigma(0, 1, 1.0, 2.0, [], 1.0)

    def test_overflow_is_infinite_not_error(self):
        assert math.isinf(bound_superlinear_sigma(2000, 10, 1.0, 1e4, [1.0] * 2000, 1.0))

    def test_bfgs_activation_at_nL_over_mu(self):
        # the sigma bound equals lambda0 at k = nL/mu = 1000 and exceeds it one step earlier
        assert bound_superlinear_sigma(1000, 10, 1.0, 100.0, [0.0] * 1000, 1.0) == pytest.approx(1.0, rel=1e-12)
        assert bound_superlinear_sigma(999, 10, 1.0, 100.0, [0.0] * 999, 1.0) > 1.0
        assert superlinear_activation(10, 1.0, 100.0, PhiSchedule.constant(0.0)) == 1000

    def test_activation_dfp_and_mixed(self):
        assert superlinear_activation(10, 1.0, 100.0, PhiSchedule.constant(1.0)) == 100_000
        k_alt = superlinear_activation(10, 1.0, 100.0, PhiSchedule.alternating())
        # geometric mean of p over a period is sqrt(mu/L) = 0.1, so about nL/mu / 0.1
        assert 9_000 < k_alt < 11_000
        assert superlinear_activation(10, 1.0, 100.0, PhiSchedule.from_list([0.0] * 5)) is None


class TestGreedy:
    def test_direction_tie_break(self, rng):
        a = np.diag([1.0, 2.0, 3.0])
        assert np.array_equal(greedy_direction(a, a), [1.0, 0.0, 0.0])

    def test_direction_example(self):
        assert np.array_equal(greedy_direction(np.diag([3.0, 1.0, 1.0]), np.eye(3)), [1.0, 0.0, 0.0])

    def test_direction_brute_force(self, rng):
        for _ in range(20):
            g = np.diag(rng.uniform(1, 10, 6))
            a = np.diag(rng.uniform(1, 10, 6))
            best = max(range(6), key=lambda i: (g[i, i] / a[i, i], -i))
            assert np.argmax(greedy_direction(g, a)) == best

    def test_empty_basis(self):
        with pytest.raises(ValueError):
            greedy_direction(np.eye(2), np.eye(2), [])

    def test_reference_basis_reproduces_B_inverse(self, rng):
        m = rng.standard_normal((4, 4))
        B = m @ m.T + 4 * np.eye(4)
        E = np.column_stack(reference_basis(B))
        assert np.allclose(E @ E.T, np.linalg.inv(B), atol=1e-12)

    def test_K(self):
        assert greedy_K(1.0) == pytest.approx(9.3178, abs=5e-5)
        assert greedy_K(100.0) == pytest.approx(1 + 600 * math.log(400), rel=1e-15)
        assert greedy_K(100.0) == pytest.approx(3595.8787, abs=1e-4)
        with pytest.raises(ValueError):
            greedy_K(0.5)

    def test_comparison_values(self):
        c = greedy_comparison(1.0, 2.0, 50)
        assert c.A[1] == pytest.approx(2 * math.exp(-1))
        assert c.B[1] == pytest.approx(1.0)
        assert c.A[1] < c.B[1]
        c = greedy_comparison(7.0, 1.0, 5)
        assert c.A[0] == pytest.approx(7.0) and c.B[0] == pytest.approx(math.sqrt(7.0))

    @pytest.mark.parametrize("Q", [1.0, 10.0, 100.0, 1000.0])
    def test_holds_after_K(self, Q):
        kmax = math.ceil(greedy_K(Q)) + 10_000
        c = greedy_comparison(Q, 1.0, kmax)
        assert c.holds_after_K()
        assert c.first_crossover() <= math.ceil(c.K)

    def test_greedy_run(self):
        p = problem(20, 100.0, seed=4)
        tr = solve_greedy_bfgs(p, max_iter=400, tol=1e-12)
        assert tr.status == "converged"
        rep = quadratic_bound_report(tr)
        assert rep.ok, rep.violated()
        assert "greedy_step" in rep.violations


class TestSolver:
    def test_start_at_minimizer(self):
        base = problem(5)
        x_star = np.arange(5.0)
        # b built from x_star with the same product makes the gradient exactly zero
        p = QuadraticProblem(base.A, base.A @ x_star, base.mu, base.L)
        tr = solve_quadratic(p, x_star)
        assert tr.iterations == 0 and len(tr.records) == 1
        assert tr.lambda0 == 0.0
        assert tr.status == "converged"

    def test_scalar_terminates_in_two_steps(self):
        # G_0 = 4, x_1 = 1/2, G_1 = 2, x_2 = 1 = A^{-1} b
        p = QuadraticProblem(np.array([[2.0]]), np.array([2.0]), 2.0, 4.0)
        tr = solve_quadratic(p, np.zeros(1), max_iter=5, tol=0.0)
        assert tr.records[1].x[0] == 0.5
        assert tr.records[2].x[0] == 1.0
        assert tr.records[2].lam == 0.0
        assert tr.iterations == 2

    def test_trace_shape(self):
        tr = solve_quadratic(problem(4), max_iter=3, tol=0.0)
        assert len(tr.records) == tr.iterations + 1 == 4
        assert tr.records[0].xi == 1.0
        assert tr.status == "max_iter"
        assert math.isnan(tr.records[-1].theta)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            solve_quadratic(problem(3), max_iter=-1)
        with pytest.raises(ValueError):
            solve_quadratic(problem(3), residual="exact")

    @pytest.mark.parametrize("schedule", SCHEDULES, ids=lambda s: s.label)
    @pytest.mark.parametrize("L", [10.0, 100.0])
    def test_invariants(self, schedule, L):
        p = problem(12, L, seed=int(L))
        tr = solve_quadratic(p, np.ones(12), schedule, max_iter=300, tol=1e-13)
        mu = p.mu
        lam = tr.lambdas
        floor = fp_floor(tr.lambda0)
        rep = quadratic_bound_report(tr, problem=p)
        assert rep.ok, rep.violated()
        for rec in tr.records:
            assert rec.rel_min >= 1 - 1e-8 and rec.rel_max <= (L / mu) * (1 + 1e-8)
        theta = tr.column("theta")[:-1]
        assert np.all(theta <= 1 - mu / L + 1e-9)
        sig, psi = tr.column("sigma"), tr.column("psi")
        assert np.all(np.diff(sig) <= 1e-9) and np.all(np.diff(psi) <= 1e-9)
        for k in range(tr.iterations):
            if lam[k] >= floor:
                assert abs(lam[k + 1] - theta[k] * lam[k]) <= 1e-8 * theta[k] * lam[k]
        assert rep.spectral_factor <= p.n * (L / mu - 1) + 1e-9

    def test_direct_residual_agrees_early(self):
        p = problem(8)
        a = solve_quadratic(p, np.ones(8), max_iter=10, tol=0.0)
        b = solve_quadratic(p, np.ones(8), max_iter=10, tol=0.0, residual="direct")
        assert np.allclose(a.xs, b.xs, rtol=1e-10, atol=1e-12)

    def test_inverse_consistency(self):
        p = problem(15, 100.0, seed=2)
        tr = solve_quadratic(p, np.ones(15), PhiSchedule.constant(0.5), max_iter=100, tol=0.0)
        assert tr.iterations == 100
        assert np.linalg.norm(tr.H @ tr.G - np.eye(15), 2) <= 1e-8

    def test_deterministic(self):
        p = problem(6)
        a = solve_quadratic(p, np.ones(6), PhiSchedule.alternating())
        b = solve_quadratic(p, np.ones(6), PhiSchedule.alternating())
        assert np.array_equal(a.lambdas, b.lambdas)
