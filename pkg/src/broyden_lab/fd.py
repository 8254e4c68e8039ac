"""Central finite differences, used as independent checks of analytic oracles."""

from __future__ import annotations

import numpy as np

__all__ = ["fd_gradient", "fd_hessian", "default_gradient_step", "default_hessian_step"]

EPS = float(np.finfo(float).eps)


def default_gradient_step(x) -> float:
    return EPS ** (1.0 / 3.0) * (1.0 + float(np.max(np.abs(x), initial=0.0)))


def default_hessian_step(x) -> float:
    return EPS ** 0.25 * (1.0 + float(np.max(np.abs(x), initial=0.0)))


def fd_gradient(value, x, h: float | None = None) -> np.ndarray:
    """Central-difference gradient of the scalar function ``value`` at ``x``.

    ``value`` may also be an object with a ``value`` method.
    """
    f = getattr(value, "value", value)
    x = np.asarray(x, dtype=float)
    h = default_gradient_step(x) if h is None else float(h)
    if h <= 0:
        raise ValueError("step must be positive")
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return out


def fd_hessian(gradient, x, h: float | None = None) -> np.ndarray:
    """Symmetrised central differences of ``gradient`` (or ``obj.gradient``)."""
    grad = getattr(gradient, "gradient", gradient)
    x = np.asarray(x, dtype=float)
    h = default_hessian_step(x) if h is None else float(h)
    if h <= 0:
        raise ValueError("step must be positive")
    n = x.size
    out = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        out[:, j] = (np.asarray(grad(x + e)) - np.asarray(grad(x - e))) / (2.0 * h)
    return 0.5 * (out + out.T)
