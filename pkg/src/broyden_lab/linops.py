"""Dense self-adjoint positive definite operators and relative quantities.

Primal vectors (points, steps) and dual vectors (gradients, operator
images) are both plain 1-D float arrays; only their dimension is checked.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = [
    "NotPositiveDefiniteError",
    "SpdOperator",
    "as_spd",
    "rel_trace",
    "rel_det",
    "norm_primal",
    "norm_dual",
    "relative_eigenvalues",
    "extreme_relative_eigenvalues",
]

# Cholesky pivots at or below this fraction of the largest diagonal entry are
# treated as zero.
PIVOT_RTOL = 1e-13
SYMMETRY_RTOL = 1e-10


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


class SpdOperator:
    """Immutable dense symmetric positive definite matrix.

    The stored matrix is exactly symmetric and read-only. Positive
    definiteness is established by a Cholesky factorization, which is kept
    for solves and determinants.
    """

    __slots__ = ("_matrix", "_chol")

    def __init__(self, matrix, *, check: bool = True):
        m = np.array(matrix, dtype=float, copy=True)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise ValueError(f"expected a non-empty square matrix, got shape {m.shape}")
        scale = np.max(np.abs(m)) if m.size else 0.0
        if not np.all(np.isfinite(m)):
            raise NotPositiveDefiniteError("matrix has non-finite entries")
        if np.max(np.abs(m - m.T)) > SYMMETRY_RTOL * max(scale, 1e-300):
            raise ValueError("matrix is not symmetric")
        m = 0.5 * (m + m.T)
        m.flags.writeable = False
        self._matrix = m
        self._chol = None
        if check:
            self._factor()

    def _factor(self):
        if self._chol is None:
            m = self._matrix
            try:
                c = scipy.linalg.cholesky(m, lower=True, check_finite=False)
            except np.linalg.LinAlgError as exc:
                raise NotPositiveDefiniteError(str(exc)) from None
            max_diag = np.max(np.diag(m))
            if max_diag <= 0 or np.min(np.diag(c)) ** 2 <= PIVOT_RTOL * max_diag:
                raise NotPositiveDefiniteError("matrix is not positive definite")
            c.flags.writeable = False
            self._chol = c
        return self._chol

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    @property
    def cholesky(self) -> np.ndarray:
        """Lower Cholesky factor ``C`` with ``matrix == C @ C.T``."""
        return self._factor()

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._matrix
        return self._matrix.astype(dtype)

    def __matmul__(self, other):
        return self._matrix @ np.asarray(other)

    def __rmatmul__(self, other):
        return np.asarray(other) @ self._matrix

    def __mul__(self, scalar) -> "SpdOperator":
        return SpdOperator(float(scalar) * self._matrix)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SpdOperator(dim={self.dim})"

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: {rhs.shape[0]} != {self.dim}")
        return scipy.linalg.cho_solve((self._factor(), True), rhs, check_finite=False)

    def inv(self) -> np.ndarray:
        h = self.solve(np.eye(self.dim))
        return 0.5 * (h + h.T)

    def quad(self, u) -> float:
        """``<A u, u>``."""
        u = _vec(u, self.dim)
        return float(u @ self._matrix @ u)

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self._factor()))))


def as_spd(a) -> SpdOperator:
    return a if isinstance(a, SpdOperator) else SpdOperator(a)


def _mat(a) -> np.ndarray:
    return a.matrix if isinstance(a, SpdOperator) else np.asarray(a, dtype=float)


def _vec(v, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != n:
        raise ValueError(f"dimension mismatch: expected vector of length {n}, got shape {v.shape}")
    return v


def _check_pair(w: np.ndarray, a: np.ndarray) -> None:
    if w.shape != a.shape or w.ndim != 2:
        raise ValueError(f"dimension mismatch: {w.shape} vs {a.shape}")


def rel_trace(w, a) -> float:
    """Trace of ``W A`` for ``W: E* -> E`` and ``A: E -> E*``."""
    w, a = _mat(w), _mat(a)
    _check_pair(w, a)
    return float(np.sum(w * a.T))


def rel_det(w, a) -> float:
    """Determinant of ``W A``."""
    w, a = _mat(w), _mat(a)
    _check_pair(w, a)
    return float(np.linalg.det(w @ a))


def norm_primal(a, h) -> float:
    a = as_spd(a)
    return float(np.sqrt(max(a.quad(h), 0.0)))


def norm_dual(a, s) -> float:
    a = as_spd(a)
    s = _vec(s, a.dim)
    return float(np.sqrt(max(s @ a.solve(s), 0.0)))


def relative_eigenvalues(g, a) -> np.ndarray:
    """Ascending eigenvalues of the pencil ``(G, A)``; ``A`` must be SPD.

    ``G`` only needs to be symmetric.
    """
    a = as_spd(a)
    g = _mat(g)
    _check_pair(g, a.matrix)
    c = a.cholesky
    # C^{-1} G C^{-T}
    t = scipy.linalg.solve_triangular(c, g, lower=True, check_finite=False)
    t = scipy.linalg.solve_triangular(c, t.T, lower=True, check_finite=False)
    return np.linalg.eigvalsh(0.5 * (t + t.T))


def extreme_relative_eigenvalues(g, a) -> tuple[float, float]:
    lam = relative_eigenvalues(g, a)
    return float(lam[0]), float(lam[-1])
