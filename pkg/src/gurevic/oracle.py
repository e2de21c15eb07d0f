"""Brute-force enumeration over words: the reference every fast path is checked against."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .shift import DEFAULT_ORACLE_CEILING, Word, birkhoff_sum, enumerate_periodic
from .skewprod import (
    PeriodicAll,
    PeriodicCylinder,
    Preimage,
    PreimageCylinder,
    SkewSystem,
    _target,
)
from .errors import BudgetError


def constrained_words(sys: SkewSystem, n: int, mode, ceiling: int = DEFAULT_ORACLE_CEILING) -> Iterator[tuple[Word, int, float]]:
    """Yield ``(w, successor, phi^n)`` for every point of the constrained set.

    Periodic points are listed by their period word (successor ``w[0]``);
    preimages of ``o`` by the word preceding ``o`` (successor ``o``'s first
    symbol).  Words are walked depth-first, carrying the partial group product
    and the partial Birkhoff sum along the prefix.
    """
    if n > ceiling:
        raise BudgetError(f"n={n} exceeds the enumeration ceiling {ceiling}")
    if n < 1:
        raise ValueError("n must be >= 1")
    shift, coc = sys.shift, sys.cocycle
    group = sys.group
    target = _target(group, mode.target)
    v = sys.potential.values
    succ = [tuple(int(j) for j in np.flatnonzero(shift.adjacency[i])) for i in range(shift.state_count)]
    psi = coc.values
    if isinstance(mode, (PeriodicAll, PeriodicCylinder)):
        starts = [mode.a] if isinstance(mode, PeriodicCylinder) else range(shift.state_count)
        fixed = None
    elif isinstance(mode, (Preimage, PreimageCylinder)):
        starts = [mode.a] if isinstance(mode, PreimageCylinder) else range(shift.state_count)
        fixed = mode.o.first
    else:
        raise TypeError(f"unknown constraint mode {mode!r}")
    word = [0] * n

    def walk(k, g, s):
        # word[:k] is fixed; g and s cover psi and phi along it (s without the last edge)
        last = word[k - 1]
        if k == n:
            nxt = word[0] if fixed is None else fixed
            if shift.adjacency[last, nxt] and g == target:
                yield tuple(word), nxt, float(s + v[last, nxt])
            return
        for j in succ[last]:
            word[k] = j
            yield from walk(k + 1, group.mul(g, psi[j]), s + v[last, j])

    for a in starts:
        word[0] = a
        yield from walk(1, group.mul(group.identity, psi[a]), 0.0)


def brute_constrained_sum(sys: SkewSystem, n: int, mode=None, **kw) -> float:
    mode = mode or PeriodicAll()
    return math.fsum(math.exp(s) for _, _, s in constrained_words(sys, n, mode, **kw))


def orbit_average(table: np.ndarray, w: Word, successor: int) -> float:
    """``(1/n) sum_j g(sigma^j x)`` for the point coded by ``w`` followed by ``successor``."""
    nxt = w[1:] + (successor,)
    return math.fsum(table[a, b] for a, b in zip(w, nxt)) / len(w)


def brute_empirical(sys: SkewSystem, n: int, mode, g) -> tuple[float, float]:
    """``(Z_n, integral of g against the empirical measure)`` by enumeration."""
    table = np.asarray(getattr(g, "values", g), dtype=float)
    num, den = [], []
    for w, succ, s in constrained_words(sys, n, mode):
        wt = math.exp(s)
        den.append(wt)
        num.append(wt * orbit_average(table, w, succ))
    z = math.fsum(den)
    return z, (math.fsum(num) / z if z > 0 else math.nan)


def brute_tail(sys: SkewSystem, n: int, mode, g, limit: float, eps: float, slack: float = 1e-12) -> float:
    table = np.asarray(getattr(g, "values", g), dtype=float)
    tail, total = [], []
    for w, succ, s in constrained_words(sys, n, mode):
        wt = math.exp(s)
        total.append(wt)
        if abs(orbit_average(table, w, succ) - limit) > eps + slack:
            tail.append(wt)
    z = math.fsum(total)
    return math.fsum(tail) / z if z > 0 else math.nan


@dataclass
class OracleCheck:
    name: str
    n: int
    fast: float
    brute: float
    ok: bool

    @property
    def rel_error(self) -> float:
        if self.brute == 0:
            return abs(self.fast)
        return abs(self.fast - self.brute) / abs(self.brute)


def _close(a: float, b: float, rel: float) -> bool:
    if b == 0:
        return abs(a) <= rel
    return abs(a - b) <= rel * abs(b)


def oracle_suite(sys: SkewSystem, n_max: int = 8, modes=None, rel: float = 1e-10) -> list[OracleCheck]:
    """Cross-check every fast path against enumeration for ``n <= n_max``.

    Covers trace sums of the transfer matrix, DP constrained sums in every mode
    (both engines), the Fourier path for ``Z^d`` cocycles and the radial chain
    where it applies.
    """
    from .skewprod import (
        constrained_table,
        fourier_log_sums,
        radial_log_sums,
        radial_preconditions,
    )
    from .groups import Zd
    from .transfer import build_operator, trace_powers

    modes = modes or default_modes(sys.shift)
    out = []
    m = build_operator(sys.shift, sys.potential).matrix
    for n, (ls, z) in enumerate(trace_powers(m, n_max), start=1):
        fast = math.exp(ls) * float(np.real(z))
        brute = math.fsum(math.exp(birkhoff_sum(sys.shift, sys.potential, w)) for w in enumerate_periodic(sys.shift, n))
        out.append(OracleCheck("trace", n, fast, brute, _close(fast, brute, rel)))
    for mode in modes:
        brute = [brute_constrained_sum(sys, n, mode) for n in range(1, n_max + 1)]
        for engine in ("array", "dict"):
            try:
                table = constrained_table(sys, n_max, mode, engine=engine)
            except BudgetError:
                continue
            for n, (lz, b) in enumerate(zip(table.log_z, brute), start=1):
                fast = math.exp(lz) if lz > -math.inf else 0.0
                out.append(OracleCheck(f"dp-{engine}:{mode_label(mode)}", n, fast, b, _close(fast, b, rel)))
    if isinstance(sys.group, Zd):
        brute = [brute_constrained_sum(sys, n, PeriodicAll()) for n in range(1, n_max + 1)]
        for n, lz in enumerate(fourier_log_sums(sys, n_max), start=1):
            fast = math.exp(lz) if lz > -math.inf else 0.0
            out.append(OracleCheck("fourier", n, fast, brute[n - 1], _close(fast, brute[n - 1], 1e-8)))
    if radial_preconditions(sys) is None:
        brute = [brute_constrained_sum(sys, n, PeriodicAll()) for n in range(1, n_max + 1)]
        for n, lz in enumerate(radial_log_sums(sys, n_max), start=1):
            fast = math.exp(lz) if lz > -math.inf else 0.0
            out.append(OracleCheck("radial", n, fast, brute[n - 1], _close(fast, brute[n - 1], rel)))
    return out


def default_modes(shift) -> list:
    """All four modes with ``a`` the first state and ``o`` the shortest cycle through it."""
    from .skewprod import BasePoint

    o = BasePoint((), shift.shortest_path(0, 0)[:-1])
    return [PeriodicAll(), PeriodicCylinder(0), Preimage(o), PreimageCylinder(0, o)]


def mode_label(mode) -> str:
    if isinstance(mode, PeriodicAll):
        return "periodic"
    if isinstance(mode, PeriodicCylinder):
        return f"periodic-cylinder[{mode.a + 1}]"
    if isinstance(mode, Preimage):
        return f"preimage[{mode.o}]"
    return f"preimage-cylinder[{mode.a + 1}|{mode.o}]"


