"""Seeded test problems: quadratics with prescribed spectra and log-sum-exp.

All randomness comes from :class:`SplitMix64` so that a seed determines the
same problem on every platform and in every language binding:

    state <- state + 0x9E3779B97F4A7C15            (mod 2^64)
    z <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9      (mod 2^64)
    z <- (z ^ (z >> 27)) * 0x94D049BB133111EB      (mod 2^64)
    output z ^ (z >> 31)

Uniforms are ``(output >> 11) * 2^-53``; normals use the cosine branch of
Box-Muller on two consecutive uniforms, ``u1`` mapped to ``(0, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fd import fd_gradient, fd_hessian
from .linops import SpdOperator
from .oracle import SmoothOracle
from .quadratic import QuadraticProblem

__all__ = [
    "SplitMix64",
    "SpectrumSpec",
    "spectrum",
    "random_orthogonal",
    "make_quadratic",
    "make_logsumexp",
    "random_logsumexp",
    "logsumexp_smoothness",
    "logsumexp_self_concordance",
    "fd_gradient",
    "fd_hessian",
]

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform on ``[0, 1)``."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def normal(self) -> float:
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def uniforms(self, size) -> np.ndarray:
        count = int(np.prod(size))
        return np.array([self.uniform() for _ in range(count)]).reshape(size)

    def normals(self, size) -> np.ndarray:
        count = int(np.prod(size))
        return np.array([self.normal() for _ in range(count)]).reshape(size)


PROFILES = ("two-cluster", "log-uniform", "explicit")


@dataclass(frozen=True)
class SpectrumSpec:
    """Eigenvalues of ``A`` relative to ``B = I``.

    For the ``explicit`` profile ``eigenvalues`` is used verbatim and
    ``mu``/``L`` default to its extremes.
    """

    n: int
    mu: float | None = None
    L: float | None = None
    profile: str = "log-uniform"
    seed: int = 0
    eigenvalues: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown spectrum profile {self.profile!r}; expected one of {PROFILES}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.profile == "explicit":
            ev = tuple(float(v) for v in self.eigenvalues)
            if len(ev) != self.n:
                raise ValueError(f"explicit spectrum needs {self.n} eigenvalues, got {len(ev)}")
            object.__setattr__(self, "eigenvalues", ev)
            if self.mu is None:
                object.__setattr__(self, "mu", min(ev))
            if self.L is None:
                object.__setattr__(self, "L", max(ev))
        if self.mu is None or self.L is None:
            raise ValueError("mu and L are required")
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "L", float(self.L))
        if not 0 < self.mu <= self.L:
            raise ValueError(f"need 0 < mu <= L, got mu={self.mu}, L={self.L}")
        if self.n == 1 and self.profile != "explicit" and self.mu != self.L:
            raise ValueError("a one-dimensional spectrum cannot attain both mu and L")
        if self.profile == "explicit":
            ev = self.eigenvalues
            if min(ev) != self.mu or max(ev) != self.L:
                raise ValueError("explicit spectrum must attain mu and L exactly")


def spectrum(spec: SpectrumSpec, rng: SplitMix64 | None = None) -> np.ndarray:
    rng = rng or SplitMix64(spec.seed)
    n, mu, L = spec.n, spec.mu, spec.L
    if spec.profile == "explicit":
        return np.array(spec.eigenvalues)
    if n == 1:
        return np.array([mu])
    if spec.profile == "log-uniform":
        lo, hi = math.log(mu), math.log(L)
        inner = [math.exp(lo + (hi - lo) * rng.uniform()) for _ in range(n - 2)]
        ev = [mu, *inner, L]
    else:
        # clusters [mu, 1.1 mu] and [L / 1.1, L], clipped to [mu, L]
        n_low = (n + 1) // 2
        low = [mu] + [mu * 1.1 ** rng.uniform() for _ in range(n_low - 1)]
        high = [L] + [L / 1.1 ** rng.uniform() for _ in range(n - n_low - 1)]
        ev = [min(max(v, mu), L) for v in low + high]
    return np.sort(np.array(ev))


def random_orthogonal(n: int, rng: SplitMix64) -> np.ndarray:
    q, r = np.linalg.qr(rng.normals((n, n)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def make_quadratic(spec: SpectrumSpec) -> QuadraticProblem:
    """``A = Q diag(ev) Q^T`` with seeded orthogonal ``Q``; ``b`` standard normal."""
    rng = SplitMix64(spec.seed)
    ev = spectrum(spec, rng)
    q = random_orthogonal(spec.n, rng)
    a = (q * ev) @ q.T
    b = rng.normals(spec.n)
    return QuadraticProblem(SpdOperator(0.5 * (a + a.T)), b, spec.mu, spec.L)


# --- regularized log-sum-exp -----------------------------------------------

_EXPM1_RANGE = 30.0

def logsumexp_smoothness(a, mu: float) -> float:
    """``mu + lambda_max(sum a_i a_i*)``, an upper bound on the Hessian."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return float(mu + np.linalg.eigvalsh(a.T @ a)[-1])


def logsumexp_self_concordance(a, mu: float) -> float:
    """Certified strong self-concordance constant ``D^3 / (4 mu^{3/2})``.

    ``D = max_ij |a_i - a_j|``. The third derivative of the log-sum-exp term
    along a unit ``h`` is the third central moment of ``<a_i, h>`` under the
    softmax weights, bounded by ``D^3/4``; a Hessian that is ``D^3/4``-Lipschitz
    on a ``mu``-strongly convex function gives this constant.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    diff = a[:, None, :] - a[None, :, :]
    d = float(np.max(np.linalg.norm(diff, axis=-1)))
    return d ** 3 / (4.0 * mu ** 1.5)


def make_logsumexp(a, b_shift, mu: float, *, M: float | None = None, L: float | None = None,
                   probe_points=None) -> SmoothOracle:
    """``f(x) = ln(sum exp(<a_i, x> + b_i)) + (mu/2)|x|^2`` with ``B = I``.

    Rows of ``a`` are the vectors ``a_i``. ``L`` and ``M`` default to
    :func:`logsumexp_smoothness` and :func:`logsumexp_self_concordance`.
    """
    a = np.array(a, dtype=float, ndmin=2)
    b_shift = np.asarray(b_shift, dtype=float).ravel()
    if a.size == 0 or a.shape[0] == 0:
        raise ValueError("log-sum-exp needs at least one vector")
    if b_shift.shape != (a.shape[0],):
        raise ValueError("b_shift must have one entry per vector")
    if mu <= 0:
        raise ValueError("mu must be positive")
    a.flags.writeable = False
    n = a.shape[1]
    mu = float(mu)

    def weights(x):
        z = a @ x + b_shift
        zmax = np.max(z)
        w = np.exp(z - zmax)
        s = np.sum(w)
        return zmax, s, w / s

    def value(x):
        zmax, s, _ = weights(x)
        return zmax + math.log(s) + 0.5 * mu * float(x @ x)

    def gradient(x):
        _, _, p = weights(x)
        return a.T @ p + mu * x

    def hessian(x):
        _, _, p = weights(x)
        ap = a.T @ p
        h = (a.T * p) @ a - np.outer(ap, ap) + mu * np.eye(n)
        return 0.5 * (h + h.T)

    def gradient_difference(x, u):
        # p(x+u)_i - p(x)_i = p_i (expm1(w_i) - sum_j p_j expm1(w_j)) / S with
        # w = a u and S = sum_j p_j exp(w_j); no cancellation for small steps.
        w = a @ u
        if np.max(np.abs(w)) > _EXPM1_RANGE:
            return gradient(x + u) - gradient(x)
        _, _, p = weights(x)
        e = np.expm1(w)
        pe = float(p @ e)
        dp = p * (e - pe) / (1.0 + pe)
        return a.T @ dp + mu * u

    return SmoothOracle(
        n, value, gradient, hessian,
        mu=mu,
        L=logsumexp_smoothness(a, mu) if L is None else L,
        M=logsumexp_self_concordance(a, mu) if M is None else M,
        probe_points=probe_points, name="logsumexp",
        gradient_difference=gradient_difference,
    )


def random_logsumexp(n: int, m: int, mu: float, seed: int, scale: float = 1.0, probe: int = 0, *,
                     M: float | None = None, L: float | None = None
                     ) -> tuple[SmoothOracle, np.ndarray, np.ndarray]:
    """Seeded log-sum-exp instance; returns ``(oracle, a, b_shift)``.

    ``a_i`` have i.i.d. normal entries with standard deviation
    ``scale / sqrt(n)``; ``b_i`` are standard normal. ``probe`` random points
    are checked against finite differences at construction.
    """
    rng = SplitMix64(seed)
    a = rng.normals((m, n)) * (scale / math.sqrt(n))
    b = rng.normals(m)
    points = [rng.normals(n) for _ in range(probe)] if probe else None
    return make_logsumexp(a, b, mu, M=M, L=L, probe_points=points), a, b
