"""Countable-state full shifts with closed-form tails, and their finite truncations.

The built-in ``zeta`` family lives on the full shift over ``a = 0, 1, 2, ...``
with ``phi(a) = -beta log(a + 1)`` and ``f(a) = (-1)^a floor(log2(a + 1))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import zeta as hurwitz_zeta

from .errors import BudgetError, ConvergenceError, ValidationError
from .groups import Cocycle, Zd
from .shift import Potential, ShiftSystem
from .skewprod import SkewSystem
from .transfer import build_operator, collatz_wielandt, perron

MATRIX_BUDGET = 4096


@dataclass(frozen=True)
class TruncationFamily:
    name: str = "zeta"
    beta: float = 2.0

    def __post_init__(self):
        if self.name != "zeta":
            raise ValidationError(f"unknown truncation family {self.name!r} (built in: zeta)")
        if not self.beta > 1:
            raise ValidationError(f"zeta family needs beta > 1 for summability, got {self.beta}")

    def phi(self, a) -> np.ndarray:
        return -self.beta * np.log(np.asarray(a, dtype=float) + 1) + 0.0

    def f(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        return np.where(a % 2 == 0, 1, -1) * _floor_log2(a + 1)

    @property
    def delta(self) -> float:
        """``sup{r >= 0 : sum_a exp(phi(a) + r |f(a)|) < inf}``, here ``(beta - 1) ln 2``."""
        return (self.beta - 1) * math.log(2)

    def tail(self, r: float, n: int) -> float:
        """``T(r, n) = sum_{a > n} exp(phi(a) + r |f(a)|)`` in closed form (``inf`` for ``r >= delta``).

        Blocks ``2^j <= a + 1 < 2^(j+1)`` share ``|f| = j`` and sum to Hurwitz
        zeta differences; the blocks decay geometrically with ratio
        ``e^r 2^(1-beta)``, and the series is cut once the geometric remainder
        is below ``1e-17`` of the total.
        """
        if r >= self.delta:
            return math.inf
        b = self.beta
        lo = n + 2  # smallest a + 1 in the tail
        if r == 0:
            return float(hurwitz_zeta(b, lo))
        j = int(_floor_log2(np.int64(lo)))
        total = 0.0
        q = math.exp(r) * 2.0 ** (1 - b)
        while True:
            start, stop = max(lo, 2**j), 2 ** (j + 1)
            block = math.exp(r * j) * (hurwitz_zeta(b, start) - hurwitz_zeta(b, stop))
            total += block
            if block <= 1e-17 * total * (1 - q) and j > 4:
                break
            j += 1
            if j > 2000:
                raise ConvergenceError("tail series did not settle", achieved=block)
        return float(total)

    def full_sum(self) -> float:
        """``sum_{a >= 0} exp(phi(a))``, the Perron root of the untruncated shift."""
        return float(hurwitz_zeta(self.beta, 1))

    @property
    def limit_pressure(self) -> float:
        return math.log(self.full_sum())


def _floor_log2(x):
    x = np.asarray(x, dtype=np.int64)
    out = np.zeros_like(x)
    y = x.copy()
    while np.any(y > 1):
        out += y > 1
        y = y // 2
    return out


def truncate(fam: TruncationFamily, n: int) -> SkewSystem:
    """The full shift on states ``0 .. n-1`` with the family's ``phi`` and ``f``."""
    if n < 2:
        raise ValidationError(f"truncation needs N >= 2, got {n}")
    a = np.arange(n)
    shift = ShiftSystem.full(n, labels=tuple(str(x) for x in a))
    pot = Potential.from_states(fam.phi(a))
    coc = Cocycle(Zd(1), tuple((int(v),) for v in fam.f(a)))
    return SkewSystem(shift, pot, coc)


@dataclass
class ConvergenceRow:
    n: int
    pressure: float
    pressure_at_xi: float
    xi: float
    delta: float
    note: str
    increment: float
    tail: float
    lower: float
    upper: float

    def csv(self) -> tuple:
        return (
            self.n, self.pressure, self.pressure_at_xi, self.xi, self.delta,
            self.increment, self.tail, self.lower, self.upper, self.note,
        )


CSV_HEADER = (
    "N", "pressure_N", "p_N(xi_N)", "xi_N", "delta_closed_form",
    "increment", "tail_T(0,N-1)", "pressure_lower", "pressure_upper", "note",
)


def _outward(x: float, direction: float) -> float:
    # move a bound away from the true value by a few ulps
    return x + direction * 4 * math.ulp(x)


def convergence_report(fam: TruncationFamily, n_list: Sequence[int], budget: int = MATRIX_BUDGET) -> list[ConvergenceRow]:
    """Pressure, ``xi`` and a bracket on the untruncated pressure for each level.

    The bracket is ``[log lam_lo, log(lam_hi + T(0, N-1))]`` with
    ``lam_lo <= lambda_N <= lam_hi`` the Collatz-Wielandt bounds of the computed
    eigenvector; the untruncated Perron root is at most ``lambda_N`` plus the
    tail mass.  ``xi_N`` outside the ``delta``-ball or without a strict minimum
    is reported as ``nan`` with a note.
    """
    from .xi import PressureFunction, find_xi

    rows = []
    prev = None
    for n in sorted(n_list):
        if n > budget:
            raise BudgetError(f"N={n} above the matrix budget {budget}")
        sys = truncate(fam, n)
        m = build_operator(sys.shift, sys.potential).matrix
        pd = perron(m, irreducible=True)
        lam_lo, lam_hi = collatz_wielandt(m, pd.right)
        p = pd.pressure
        t = fam.tail(0.0, n - 1)
        note = ""
        try:
            res = find_xi(PressureFunction(sys.shift, sys.potential, sys.f, fam.delta))
            xi, p_xi = float(res.xi[0]), res.pressure_at_xi
            if abs(xi) >= fam.delta:
                note = f"xi_N={xi:.6g} outside the delta-ball"
        except ConvergenceError as exc:
            xi, p_xi, note = math.nan, math.nan, f"no interior minimum: {exc}"
        rows.append(
            ConvergenceRow(
                n=n,
                pressure=p,
                pressure_at_xi=p_xi,
                xi=xi,
                delta=fam.delta,
                note=note,
                increment=math.nan if prev is None else p - prev,
                tail=t,
                lower=_outward(math.log(lam_lo), -1),
                upper=_outward(math.log(lam_hi + t), +1),
            )
        )
        prev = p
    return rows


def check_family_assumptions(fam: TruncationFamily, n: int):
    """Assumption report for the level-``n`` truncation with the family's closed-form ``delta``."""
    from .xi import check_assumptions

    return check_assumptions(truncate(fam, n), delta=fam.delta)


__all__ = [
    "CSV_HEADER",
    "ConvergenceRow",
    "TruncationFamily",
    "check_family_assumptions",
    "convergence_report",
    "truncate",
]
