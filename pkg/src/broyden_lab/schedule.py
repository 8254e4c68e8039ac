"""Choice of the Broyden parameter at every iteration."""

from __future__ import annotations

from typing import Callable, Sequence

from .broyden import check_phi

__all__ = ["PhiSchedule", "parse_schedule"]


class PhiSchedule:
    """Maps an iteration index ``k`` to ``phi_k`` in ``[0, 1]``.

    Build one with :meth:`constant`, :meth:`from_list`, :meth:`alternating`
    or :meth:`from_callback`. A list schedule raises ``IndexError`` past its
    end.
    """

    def __init__(self, fn: Callable[[int], float], label: str, constant_value: float | None = None):
        self._fn = fn
        self.label = label
        self.constant_value = constant_value

    @classmethod
    def constant(cls, phi: float) -> "PhiSchedule":
        phi = check_phi(phi)
        label = {0.0: "bfgs", 1.0: "dfp"}.get(phi, _fmt(phi))
        return cls(lambda k: phi, label, phi)

    @classmethod
    def bfgs(cls) -> "PhiSchedule":
        return cls.constant(0.0)

    @classmethod
    def dfp(cls) -> "PhiSchedule":
        return cls.constant(1.0)

    @classmethod
    def from_list(cls, phis: Sequence[float]) -> "PhiSchedule":
        values = tuple(check_phi(p) for p in phis)
        if not values:
            raise ValueError("phi list is empty")

        def fn(k):
            if k >= len(values):
                raise IndexError(f"phi schedule has only {len(values)} entries, asked for k={k}")
            return values[k]

        return cls(fn, "[" + ",".join(_fmt(p) for p in values) + "]")

    @classmethod
    def alternating(cls, first: float = 0.0, second: float = 1.0) -> "PhiSchedule":
        a, b = check_phi(first), check_phi(second)
        label = "alternating" if (a, b) == (0.0, 1.0) else f"alternating({_fmt(a)},{_fmt(b)})"
        return cls(lambda k: a if k % 2 == 0 else b, label)

    @classmethod
    def from_callback(cls, fn: Callable[[int], float], label: str = "callback") -> "PhiSchedule":
        return cls(fn, label)

    def __call__(self, k: int) -> float:
        if k < 0:
            raise IndexError("iteration index must be non-negative")
        return check_phi(self._fn(k))

    def values(self, k: int) -> list[float]:
        """``[phi_0, ..., phi_{k-1}]``."""
        return [self(i) for i in range(k)]

    def __repr__(self):
        return f"PhiSchedule({self.label})"


def _fmt(p: float) -> str:
    return repr(float(p))


_NAMED = {"bfgs": 0.0, "dfp": 1.0}


def parse_schedule(text: str) -> PhiSchedule:
    """Parse ``bfgs``, ``dfp``, ``alternating``, a number, or ``[p0,p1,...]``."""
    t = text.strip().lower()
    if t in _NAMED:
        return PhiSchedule.constant(_NAMED[t])
    if t == "alternating":
        return PhiSchedule.alternating()
    if t.startswith("[") and t.endswith("]"):
        return PhiSchedule.from_list([float(p) for p in t[1:-1].split(",") if p.strip()])
    try:
        value = float(t)
    except ValueError:
        raise ValueError(f"cannot parse phi schedule {text!r}") from None
    return PhiSchedule.constant(value)
