"""Per-iteration solver records and evaluated rate bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["IterRecord", "SolverTrace", "BoundReport", "fp_floor", "safe_exp"]

EPS = float(np.finfo(float).eps)

OK = "ok"
CONVERGED = "converged"
MAX_ITER = "max_iter"
BREAKDOWN = "breakdown"


def fp_floor(lambda0: float) -> float:
    """Below ``1e3 * eps * lambda0`` the measured progress is roundoff."""
    return 1e3 * EPS * lambda0


def safe_exp(log_value):
    with np.errstate(over="ignore"):
        return np.exp(log_value)


@dataclass
class IterRecord:
    """State at iterate ``k`` and the step taken from it.

    Step quantities (``theta``, ``phi``, ``r``) are NaN on the final record.
    ``rel_min``/``rel_max`` are the extreme relative eigenvalues of ``G_k``
    with respect to the Hessian at ``x_k``; ``j_rel_min``/``j_rel_max`` with
    respect to the integral Hessian of the step (general scheme only).
    """

    k: int
    x: np.ndarray
    lam: float
    theta: float = math.nan
    sigma: float = math.nan
    psi: float = math.nan
    phi: float = math.nan
    r: float = math.nan
    xi: float = 1.0
    status: str = OK
    rel_min: float = math.nan
    rel_max: float = math.nan
    j_rel_min: float = math.nan
    j_rel_max: float = math.nan


@dataclass
class SolverTrace:
    kind: str
    n: int
    mu: float
    L: float
    M: float = 0.0
    records: list[IterRecord] = field(default_factory=list)
    status: str = OK
    message: str = ""
    in_theory: bool = True
    schedule_label: str = ""
    schedule: object | None = None
    H: np.ndarray | None = None
    G: np.ndarray | None = None

    @property
    def iterations(self) -> int:
        return len(self.records) - 1

    @property
    def lambda0(self) -> float:
        return self.records[0].lam

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def lambdas(self) -> np.ndarray:
        return self.column("lam")

    @property
    def phis(self) -> list[float]:
        return [r.phi for r in self.records[:-1]]

    @property
    def xs(self) -> np.ndarray:
        return np.array([r.x for r in self.records])

    def above_floor(self) -> np.ndarray:
        """Mask of records whose ``lambda_k`` is above the roundoff floor."""
        lam = self.lambdas
        return lam >= fp_floor(self.lambda0)


@dataclass
class BoundReport:
    """Observed residuals next to the theoretical bounds, per iteration.

    ``checked`` marks iterations above the roundoff floor; ``violations``
    maps a bound name to a boolean array that is True where the observed
    value exceeds the bound by more than the relative tolerance.
    """

    k: np.ndarray
    observed: np.ndarray
    linear_bound: np.ndarray
    superlinear_sigma_bound: np.ndarray
    superlinear_psi_bound: np.ndarray
    greedy_bound: np.ndarray | None = None
    checked: np.ndarray | None = None
    violations: dict[str, np.ndarray] = field(default_factory=dict)
    spectral_factor: float | None = None

    @property
    def ok(self) -> bool:
        return not any(np.any(v) for v in self.violations.values())

    def violated(self) -> list[str]:
        return [name for name, v in self.violations.items() if np.any(v)]
