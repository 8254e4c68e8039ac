"""Objective oracles for the general quasi-Newton scheme."""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .fd import EPS, fd_gradient, fd_hessian
from .linops import SpdOperator, as_spd, extreme_relative_eigenvalues

__all__ = ["SmoothOracle", "OracleCheckError", "quadratic_oracle"]

PROBE_RTOL = 1e-5


class OracleCheckError(ValueError):
    pass


class SmoothOracle:
    """``f``, its gradient and Hessian, plus the constants of the analysis.

    ``mu B <= hess f(x) <= L B`` everywhere and ``f`` is strongly
    self-concordant with constant ``M`` (``M = 0`` for quadratics).

    When ``probe_points`` is given, the gradient and Hessian are compared with
    central differences (step ``eps^(1/3) * (1 + |x|_inf)``) and the Hessian
    sandwich is spot-checked at each point.
    """

    def __init__(self, dim: int, value: Callable, gradient: Callable, hessian: Callable, *,
                 mu: float, L: float, M: float = 0.0, B=None,
                 probe_points: Iterable | None = None, name: str = "oracle",
                 gradient_difference: Callable | None = None):
        self.dim = int(dim)
        self._value = value
        self._gradient = gradient
        self._hessian = hessian
        self._gradient_difference = gradient_difference
        self.mu = float(mu)
        self.L = float(L)
        self.M = float(M)
        self.B = SpdOperator(np.eye(self.dim)) if B is None else as_spd(B)
        self.name = name
        if not 0 < self.mu <= self.L:
            raise ValueError(f"need 0 < mu <= L, got mu={mu}, L={L}")
        if self.M < 0:
            raise ValueError("M must be non-negative")
        if probe_points is not None:
            for x in probe_points:
                self.verify_at(x)

    def value(self, x) -> float:
        return float(self._value(np.asarray(x, dtype=float)))

    def gradient(self, x) -> np.ndarray:
        return np.asarray(self._gradient(np.asarray(x, dtype=float)), dtype=float)

    def hessian(self, x) -> SpdOperator:
        return as_spd(self._hessian(np.asarray(x, dtype=float)))

    def gradient_difference(self, x, u) -> np.ndarray:
        """``grad f(x + u) - grad f(x)``.

        Oracles may supply a cancellation-free formula; the fallback subtracts
        two gradient evaluations and so carries absolute roundoff of order
        ``eps * |grad f|`` regardless of how small ``u`` is.
        """
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if self._gradient_difference is not None:
            return np.asarray(self._gradient_difference(x, u), dtype=float)
        return self.gradient(x + u) - self.gradient(x)

    def verify_at(self, x, rtol: float = PROBE_RTOL) -> None:
        x = np.asarray(x, dtype=float)
        h = EPS ** (1.0 / 3.0) * (1.0 + float(np.max(np.abs(x))))
        g = self.gradient(x)
        g_fd = fd_gradient(self.value, x, h)
        if np.linalg.norm(g_fd - g) > rtol * max(np.linalg.norm(g), 1.0):
            raise OracleCheckError(f"{self.name}: gradient disagrees with finite differences at {x}")
        hess = self.hessian(x)
        h_fd = fd_hessian(self.gradient, x, h)
        if np.linalg.norm(h_fd - hess.matrix) > rtol * max(np.linalg.norm(hess.matrix), 1.0):
            raise OracleCheckError(f"{self.name}: Hessian disagrees with finite differences at {x}")
        lo, hi = extreme_relative_eigenvalues(hess, self.B)
        if lo < self.mu * (1 - 1e-9) or hi > self.L * (1 + 1e-9):
            raise OracleCheckError(
                f"{self.name}: Hessian spectrum [{lo:.6g}, {hi:.6g}] outside [mu, L] at {x}"
            )

    def __repr__(self):
        return f"SmoothOracle({self.name}, dim={self.dim}, mu={self.mu}, L={self.L}, M={self.M})"


def quadratic_oracle(problem) -> SmoothOracle:
    """Oracle view of a :class:`~broyden_lab.quadratic.QuadraticProblem` (``M = 0``)."""
    A = problem.A
    return SmoothOracle(
        problem.n, problem.value, problem.gradient, lambda x: A,
        mu=problem.mu, L=problem.L, M=0.0, B=problem.B, name="quadratic",
        gradient_difference=lambda x, u: A @ u,
    )
