"""Weighted equidistribution of constrained orbits and large-deviation tails."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptySetError, GurevicError, ValidationError
from .oracle import brute_empirical, brute_tail, mode_label
from .shift import ShiftSystem
from .skewprod import (
    DEFAULT_BUDGET,
    Budget,
    PeriodicAll,
    SkewSystem,
    _mode_setup,
    _target,
    constrained_table,
    dp_layers,
)
from .transfer import gibbs_measure

TAIL_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Locally constant observable stored as an ``S x S`` edge table (rows constant for depth 1)."""

    __test__ = False  # not a pytest class

    values: np.ndarray
    depth: int = 2
    name: str = "g"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError("test function table must be square")
        if not np.all(np.isfinite(v)):
            raise ValidationError("test function must be bounded")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_states(cls, values: Sequence[float], name: str = "g") -> "TestFunction":
        v = np.asarray(values, dtype=float)
        return cls(np.repeat(v[:, None], len(v), axis=1), 1, name)

    @classmethod
    def constant(cls, s: int, c: float = 1.0) -> "TestFunction":
        return cls(np.full((s, s), float(c)), 1, f"{c:g}")

    @classmethod
    def indicator(cls, s: int, word: Sequence[int]) -> "TestFunction":
        """Indicator of the cylinder ``[word]`` for words of length 1 or 2 (0-based)."""
        word = tuple(word)
        name = "1[" + "".join(str(x + 1) for x in word) + "]"
        if len(word) == 1:
            v = np.zeros(s)
            v[word[0]] = 1.0
            return cls.from_states(v, name)
        if len(word) == 2:
            t = np.zeros((s, s))
            t[word] = 1.0
            return cls(t, 2, name)
        raise ValidationError("only cylinders of length 1 or 2 are locally constant of depth <= 2")

    def combine(self, a: float, other: "TestFunction", b: float) -> "TestFunction":
        return TestFunction(a * self.values + b * other.values, max(self.depth, other.depth), "combo")

    @property
    def state_count(self) -> int:
        return self.values.shape[0]


def _empty(sys: SkewSystem, mode, n: int) -> EmptySetError:
    why = ""
    if sys.shift.period > 1:
        why = f"; base shift has period {sys.shift.period}"
    elif sys.mixing_certificate is not None and sys.mixing_certificate.status == "failed":
        why = f"; {sys.mixing_certificate.detail}"
    return EmptySetError(f"constrained set {mode_label(mode)} is empty at n={n}{why}")


def empirical_integral(
    sys: SkewSystem, mode, n: int, g: TestFunction, method: str = "dp", budget: Budget = DEFAULT_BUDGET
) -> float:
    """Integral of ``g`` against the weighted empirical measure of the constrained set.

    ``method="dp"`` runs the accumulator DP, ``"brute"`` enumerates orbits.
    """
    if method == "brute":
        z, val = brute_empirical(sys, n, mode, g)
    elif method == "dp":
        table = constrained_table(sys, n, mode, g=g, budget=budget)
        z = table.log_z[-1]
        val = table.g_mean[-1]
        z = 0.0 if z == -math.inf else 1.0
    else:
        raise ValueError(f"unknown method {method!r}")
    if z == 0:
        raise _empty(sys, mode, n)
    return float(val)


def empirical_sequence(sys: SkewSystem, mode, n_max: int, g: TestFunction, budget: Budget = DEFAULT_BUDGET) -> np.ndarray:
    """Empirical integrals for every ``n <= n_max`` from one DP run (``nan`` where empty)."""
    return constrained_table(sys, n_max, mode, g=g, budget=budget).g_mean


def gibbs_limit(sys: SkewSystem, g: TestFunction, xi=None) -> float:
    """``int g d mu^xi`` from the Gibbs edge marginals."""
    from .xi import PressureFunction, find_xi

    if xi is None:
        xi = find_xi(PressureFunction(sys.shift, sys.potential, sys.f)).xi
    return gibbs_measure(sys.shift, sys.potential, sys.f, xi).integrate(g.values)


@dataclass
class EquidistRow:
    mode: str
    n: int
    g_name: str
    empirical: float
    limit: float
    error: str = ""

    @property
    def abs_diff(self) -> float:
        return abs(self.empirical - self.limit)

    def csv(self) -> tuple:
        return (self.mode, self.n, self.g_name, self.empirical, self.limit, self.abs_diff, self.error)


@dataclass
class EquidistReport:
    rows: list
    limit: float
    xi: list
    base_point: str = ""
    tail_rows: list = field(default_factory=list)

    def for_mode(self, label: str) -> list:
        return [r for r in self.rows if r.mode == label]


def equidist_report(
    sys: SkewSystem,
    g: TestFunction,
    n_list: Sequence[int],
    modes: Sequence,
    xi=None,
    budget: Budget = DEFAULT_BUDGET,
) -> EquidistReport:
    """Empirical integrals for each mode and ``n``, against ``int g d mu^xi``.

    Budget errors and empty sets are recorded in the row and the run continues.
    """
    from .xi import PressureFunction, find_xi

    if xi is None:
        xi = find_xi(PressureFunction(sys.shift, sys.potential, sys.f)).xi
    limit = gibbs_limit(sys, g, xi)
    rows = []
    n_max = max(n_list)
    base = ""
    for mode in modes:
        label = mode_label(mode)
        if hasattr(mode, "o"):
            base = str(mode.o)
        try:
            seq = empirical_sequence(sys, mode, n_max, g, budget)
        except GurevicError as exc:
            rows += [EquidistRow(label, n, g.name, math.nan, limit, str(exc)) for n in n_list]
            continue
        for n in n_list:
            v = seq[n - 1]
            err = "" if np.isfinite(v) else str(_empty(sys, mode, n))
            rows.append(EquidistRow(label, n, g.name, float(v), limit, err))
    return EquidistReport(rows, limit, [float(x) for x in np.atleast_1d(xi)], base)


# --- large deviations -----------------------------------------------------------------


def _levels(shift: ShiftSystem, g: TestFunction) -> np.ndarray:
    return np.unique(g.values[shift.adjacency])


def tail_masses(
    sys: SkewSystem,
    g: TestFunction,
    eps: float,
    n_max: int,
    mode=None,
    limit: float | None = None,
    budget: Budget = DEFAULT_BUDGET,
) -> np.ndarray:
    """Tail mass ``P(|int g d tau_{x,n} - limit| > eps)`` for ``n = 1..n_max`` (``nan`` where empty).

    The DP carries, besides the group element, the number of edges on which
    ``g`` takes each of its values, so orbit averages are known exactly.
    """
    mode = mode or PeriodicAll()
    if limit is None:
        limit = gibbs_limit(sys, g)
    levels = _levels(sys.shift, g)
    s = sys.shift.state_count
    _, read = _mode_setup(mode, s)
    target = _target(sys.group, mode.target)
    out = np.full(n_max, math.nan)
    for layer in dp_layers(sys, n_max, mode, count_values=(g, levels), budget=budget):
        rows = np.flatnonzero(layer.rows_for(target))
        if rows.size == 0:
            continue
        mass = np.array([read(layer.values[r])[0] for r in rows])
        total = mass.sum()
        if total <= 0:
            continue
        avg = layer.extras[rows] @ levels / layer.step
        tail = np.abs(avg - limit) > eps + TAIL_SLACK
        out[layer.step - 1] = float(mass[tail].sum() / total)
    return out


@dataclass
class TailFit:
    n: list
    tail_mass: list
    eta: float
    intercept: float
    residual: float
    r2: float
    epsilon: float

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "eta_fit": self.eta,
            "intercept": self.intercept,
            "residual": self.residual,
            "r2": self.r2,
            "n": self.n,
            "tail_mass": self.tail_mass,
        }

    def rows(self) -> list:
        return [(n, self.epsilon, t, self.eta, self.residual) for n, t in zip(self.n, self.tail_mass)]


def ld_tail(
    sys: SkewSystem,
    g: TestFunction,
    eps: float,
    n_list: Sequence[int],
    mode=None,
    limit: float | None = None,
    budget: Budget = DEFAULT_BUDGET,
) -> TailFit:
    """Tail masses on ``n_list`` with the log-linear fit ``log tail = c - eta n``.

    Lengths with an empty constrained set or zero tail mass are left out of the
    fit; the RMS residual and ``R^2`` of the regression are reported.
    """
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    tails = tail_masses(sys, g, eps, max(n_list), mode, limit, budget)
    ns = [n for n in n_list if np.isfinite(tails[n - 1])]
    ts = [float(tails[n - 1]) for n in ns]
    fit_n = np.array([n for n, t in zip(ns, ts) if t > 0], dtype=float)
    fit_t = np.array([t for t in ts if t > 0])
    if fit_n.size < 2:
        return TailFit(ns, ts, math.nan, math.nan, math.nan, math.nan, eps)
    slope, intercept = np.polyfit(fit_n, np.log(fit_t), 1)
    resid = np.log(fit_t) - (intercept + slope * fit_n)
    y = np.log(fit_t)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return TailFit(ns, ts, float(-slope), float(intercept), float(np.sqrt(np.mean(resid**2))), r2, eps)


def ld_tail_brute(sys: SkewSystem, g: TestFunction, eps: float, n: int, mode=None, limit: float | None = None) -> float:
    mode = mode or PeriodicAll()
    if limit is None:
        limit = gibbs_limit(sys, g)
    return brute_tail(sys, n, mode, g, limit, eps, TAIL_SLACK)


__all__ = [
    "EquidistReport",
    "EquidistRow",
    "TailFit",
    "TestFunction",
    "empirical_integral",
    "empirical_sequence",
    "equidist_report",
    "gibbs_limit",
    "ld_tail",
    "ld_tail_brute",
    "tail_masses",
]

