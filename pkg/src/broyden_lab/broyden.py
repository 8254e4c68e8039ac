"""Convex Broyden class of Hessian-approximation updates.

``A`` is the target operator and ``G`` the current approximation. Updates
only see ``A`` through the product ``Au``; the closeness measure and the
potentials need the full target since they involve ``A^{-1}``.

``phi = 1`` is DFP, ``phi = 0`` is BFGS.
"""

from __future__ import annotations

import numpy as np

from .linops import NotPositiveDefiniteError, SpdOperator, _mat, _vec, as_spd

__all__ = [
    "DegenerateCurvatureError",
    "NumericalBreakdownError",
    "check_phi",
    "broyden_update",
    "dfp_update",
    "bfgs_update",
    "inverse_broyden_update",
    "theta",
    "theta_from_products",
    "sigma_potential",
    "psi_potential",
    "omega",
    "broyden_det_ratio",
    "rank1_det",
]

# <Au,u> and <Gu,u> below this multiple of their natural scale count as zero.
CURVATURE_RTOL = 1e-14


class DegenerateCurvatureError(ArithmeticError):
    pass


class NumericalBreakdownError(ArithmeticError):
    pass


def check_phi(phi) -> float:
    phi = float(phi)
    if not 0.0 <= phi <= 1.0:
        raise ValueError(f"phi must lie in [0, 1] (convex Broyden class), got {phi!r}")
    return phi


def _curvatures(g: np.ndarray, u: np.ndarray, au: np.ndarray, gu: np.ndarray):
    uu = float(u @ u)
    uau = float(au @ u)
    ugu = float(gu @ u)
    if uau <= CURVATURE_RTOL * np.sqrt(uu) * np.linalg.norm(au) or uau <= 0.0:
        raise DegenerateCurvatureError(f"<Au, u> = {uau:.3e} is not positive")
    if g is not None:
        g_scale = uu * np.linalg.norm(g)
    else:
        g_scale = np.sqrt(uu) * np.linalg.norm(gu)
    if ugu <= CURVATURE_RTOL * g_scale or ugu <= 0.0:
        raise DegenerateCurvatureError(f"<Gu, u> = {ugu:.3e} is not positive")
    return uau, ugu


def broyden_update(g, u, au, phi) -> SpdOperator:
    """``Broyd_phi(A, G, u)`` from ``G``, the direction ``u`` and ``Au``.

    Returns ``G`` itself when ``u`` is zero. The result is checked to be
    positive definite.
    """
    phi = check_phi(phi)
    g_op = as_spd(g)
    gm = g_op.matrix
    u = _vec(u, g_op.dim)
    au = _vec(au, g_op.dim)
    if not np.any(u):
        return g_op
    gu = gm @ u
    uau, ugu = _curvatures(gm, u, au, gu)

    aa = np.outer(au, au) / uau
    dfp = -(np.outer(au, gu) + np.outer(gu, au)) / uau + (ugu / uau + 1.0) * aa
    bfgs = -np.outer(gu, gu) / ugu + aa
    g_new = gm + phi * dfp + (1.0 - phi) * bfgs
    g_new = 0.5 * (g_new + g_new.T)
    try:
        return SpdOperator(g_new)
    except NotPositiveDefiniteError as exc:
        raise NumericalBreakdownError(f"updated approximation lost definiteness: {exc}") from None


def dfp_update(g, u, au) -> SpdOperator:
    return broyden_update(g, u, au, 1.0)


def bfgs_update(g, u, au) -> SpdOperator:
    return broyden_update(g, u, au, 0.0)


def inverse_broyden_update(h, u, au, phi, gu=None, *, validate: bool = False) -> SpdOperator:
    """Inverse of ``broyden_update`` computed from ``H = G^{-1}`` in O(n^2).

    ``gu`` is the product ``G u``. Inside a quasi-Newton step ``u = -H grad``
    it is simply ``-grad``; when omitted it is recovered by a solve with
    ``H``, which costs O(n^3).

    The update uses the inverse form of the Broyden class,

        H+ = H - Hy y*H / <y, Hy> + u u* / <y, u> + psi <y, Hy> w w*,
        w = u / <y, u> - Hy / <y, Hy>,   y = Au,

    where ``psi = 1`` is BFGS and ``psi = 0`` is DFP. The direct parameter
    maps to ``psi = (1 - phi) / (1 - phi + phi m)`` with
    ``m = <y, Hy> <Gu, u> / <y, u>^2 >= 1``, so the denominator never
    vanishes.
    """
    phi = check_phi(phi)
    hm = _mat(h)
    n = hm.shape[0]
    u = _vec(u, n)
    au = _vec(au, n)
    if not np.any(u):
        return h if isinstance(h, SpdOperator) else SpdOperator(hm, check=validate)
    if gu is None:
        gu = np.linalg.solve(hm, u)
    gu = _vec(gu, n)
    uau, ugu = _curvatures(None, u, au, gu)

    hy = hm @ au
    yhy = float(au @ hy)
    if not yhy > 0.0:
        raise NumericalBreakdownError(f"<Au, H Au> = {yhy:.3e} is not positive")
    m = (yhy / uau) * (ugu / uau)
    psi = (1.0 - phi) / (1.0 - phi + phi * m)
    w = u / uau - hy / yhy
    h0 = hm - np.outer(hy, hy) / yhy + np.outer(u, u) / uau + (psi * yhy) * np.outer(w, w)
    h0 = 0.5 * (h0 + h0.T)
    try:
        return SpdOperator(h0, check=validate)
    except NotPositiveDefiniteError as exc:
        raise NumericalBreakdownError(f"updated inverse lost definiteness: {exc}") from None


def theta_from_products(a, gu, au) -> float:
    """Closeness measure evaluated from ``Gu`` and ``Au``.

    Zero when both products vanish (the ``u = 0`` convention).
    """
    a = as_spd(a)
    gu = _vec(gu, a.dim)
    au = _vec(au, a.dim)
    if not np.any(gu) and not np.any(au):
        return 0.0
    d = gu - au
    w = a.solve(np.column_stack([d, gu]))
    num = float(d @ w[:, 0])
    den = float(gu @ w[:, 1])
    if not den > 0.0:
        raise DegenerateCurvatureError(f"<G A^-1 G u, u> = {den:.3e} is not positive")
    return float(np.sqrt(max(num, 0.0) / den))


def theta(a, g, u) -> float:
    """``[<(G-A)A^{-1}(G-A)u,u> / <G A^{-1} G u,u>]^{1/2}``; zero for ``u = 0``."""
    a = as_spd(a)
    gm = _mat(g)
    u = _vec(u, a.dim)
    if not np.any(u):
        return 0.0
    return theta_from_products(a, gm @ u, a @ u)


def sigma_potential(a, g) -> float:
    """Trace potential ``<A^{-1}, G - A>``."""
    a = as_spd(a)
    gm = _mat(g)
    if gm.shape != a.matrix.shape:
        raise ValueError(f"dimension mismatch: {gm.shape} vs {a.matrix.shape}")
    return float(np.trace(a.solve(gm))) - a.dim


def psi_potential(a, g) -> float:
    """Bregman divergence of ``-ln Det`` between ``A`` and ``G``."""
    a = as_spd(a)
    g = as_spd(g)
    if g.dim != a.dim:
        raise ValueError(f"dimension mismatch: {g.dim} vs {a.dim}")
    return sigma_potential(a, g) - (g.logdet() - a.logdet())


def omega(t):
    """``t - ln(1 + t)`` on ``t > -1``; works elementwise on arrays."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= -1.0):
        raise ValueError("omega is defined only for t > -1")
    out = t_arr - np.log1p(t_arr)
    return float(out) if out.ndim == 0 else out


def broyden_det_ratio(a, g, u, phi) -> float:
    """Closed form of ``Det(G^{-1}, Broyd_phi(A, G, u))`` for ``u != 0``."""
    phi = check_phi(phi)
    a = as_spd(a)
    g = as_spd(g)
    u = _vec(u, a.dim)
    if not np.any(u):
        raise ValueError("determinant ratio requires a nonzero direction")
    au = a @ u
    uau = float(au @ u)
    ugu = g.quad(u)
    agau = float(au @ g.solve(au))
    return phi * agau / uau + (1.0 - phi) * uau / ugu


def rank1_det(a, s, alpha) -> float:
    """``Det(A^{-1}, A + alpha s s*) = 1 + alpha <s, A^{-1} s>``."""
    a = as_spd(a)
    s = _vec(s, a.dim)
    return 1.0 + float(alpha) * float(s @ a.solve(s))
