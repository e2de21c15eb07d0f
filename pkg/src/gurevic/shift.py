"""Finite Markov shifts, allowed words and locally constant potentials.

States are indexed ``0 .. S-1`` internally; configuration files and display
labels use ``1 .. S``.  A word is a plain tuple of state indices.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from math import gcd
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.sparse import csgraph

from .errors import BudgetError, ValidationError

Word = tuple[int, ...]

DEFAULT_ORACLE_CEILING = 20


@dataclass(frozen=True, eq=False)
class ShiftSystem:
    """A subshift of finite type given by a 0/1 transition matrix.

    The structural flags are computed on construction.  ``period`` is the gcd
    of all cycle lengths in the transition graph.
    """

    adjacency: np.ndarray
    labels: tuple[str, ...] = ()
    transitive: bool = field(init=False)
    mixing: bool = field(init=False)
    period: int = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValidationError(f"transition matrix must be square and non-empty, got shape {a.shape}")
        a = (a != 0)
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        s = a.shape[0]
        labels = tuple(self.labels) if self.labels else tuple(str(i + 1) for i in range(s))
        if len(labels) != s:
            raise ValidationError(f"{len(labels)} labels given for {s} states")
        object.__setattr__(self, "labels", labels)
        for i in range(s):
            if not a[i].any():
                raise ValidationError(f"state {labels[i]} has no successor (dead state)")
            if not a[:, i].any():
                raise ValidationError(f"state {labels[i]} has no predecessor")
        if a.all():
            transitive, period = True, 1
        else:
            ncomp, _ = csgraph.connected_components(a.astype(np.int8), directed=True, connection="strong")
            transitive = ncomp == 1
            period = _graph_period(a)
        object.__setattr__(self, "transitive", bool(transitive))
        object.__setattr__(self, "period", int(period))
        object.__setattr__(self, "mixing", bool(transitive and period == 1))

    @property
    def state_count(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def full(cls, s: int, labels: Sequence[str] = ()) -> "ShiftSystem":
        return cls(np.ones((s, s), dtype=bool), tuple(labels))

    def allowed(self, i: int, j: int) -> bool:
        return bool(self.adjacency[i, j])

    def is_allowed(self, w: Sequence[int]) -> bool:
        if len(w) == 0:
            return False
        s = self.state_count
        if any(not (0 <= x < s) for x in w):
            return False
        return all(self.adjacency[w[t], w[t + 1]] for t in range(len(w) - 1))

    def check_word(self, w: Sequence[int], periodic: bool = False) -> Word:
        w = tuple(int(x) for x in w)
        if not self.is_allowed(w):
            raise ValidationError(f"word {self.format_word(w)} is not allowed")
        if periodic and not self.adjacency[w[-1], w[0]]:
            raise ValidationError(
                f"word {self.format_word(w)} cannot be closed up: edge "
                f"{self.labels[w[-1]]}->{self.labels[w[0]]} is forbidden"
            )
        return w

    def format_word(self, w: Sequence[int]) -> str:
        return "(" + ",".join(self.labels[x] if 0 <= x < self.state_count else f"?{x}" for x in w) + ")"

    def primitivity_exponent(self) -> int | None:
        """Smallest ``N <= S**2`` with ``A**N > 0`` entrywise, or ``None``."""
        a = self.adjacency.astype(np.int64)
        p = a.copy()
        for n in range(1, self.state_count**2 + 1):
            if p.all():
                return n
            p = ((p @ a) > 0).astype(np.int64)
        return None

    def shortest_path(self, i: int, j: int) -> Word:
        """Shortest path ``i -> ... -> j`` (length >= 1 edge), ties broken by lowest index."""
        prev = {}
        q = deque()
        for k in np.flatnonzero(self.adjacency[i]):
            k = int(k)
            if k not in prev:
                prev[k] = None
                q.append(k)
        while q:
            u = q.popleft()
            if u == j:
                path = [u]
                while prev[path[-1]] is not None:
                    path.append(prev[path[-1]])
                return (i,) + tuple(reversed(path))
            for k in np.flatnonzero(self.adjacency[u]):
                k = int(k)
                if k not in prev:
                    prev[k] = u
                    q.append(k)
        raise ValidationError(f"no path from {self.labels[i]} to {self.labels[j]}")

    def trace_power(self, n: int) -> int:
        """Exact ``trace(A**n)`` in integer arithmetic."""
        a = self.adjacency.astype(object)
        p = np.identity(self.state_count, dtype=object)
        for _ in range(n):
            p = p.dot(a)
        return int(sum(p[i, i] for i in range(self.state_count)))


def _graph_period(a: np.ndarray) -> int:
    # gcd over edges u->v inside a strongly connected component of
    # level(u) + 1 - level(v), with BFS levels from one root per component
    ncomp, comp = csgraph.connected_components(a.astype(np.int8), directed=True, connection="strong")
    graph = csgraph.csgraph_from_dense(a.astype(np.int8))
    level = np.full(a.shape[0], -1, dtype=np.int64)
    for c in range(ncomp):
        root = int(np.flatnonzero(comp == c)[0])
        dist = csgraph.shortest_path(graph, unweighted=True, indices=root)
        inside = (comp == c) & np.isfinite(dist)
        level[inside] = dist[inside].astype(np.int64)
    u, v = np.nonzero(a)
    same = comp[u] == comp[v]
    diffs = np.abs(level[u[same]] + 1 - level[v[same]])
    g = int(np.gcd.reduce(diffs)) if diffs.size else 0
    return g if g > 0 else 1


@dataclass(frozen=True, eq=False)
class Potential:
    """Locally constant potential of depth 1 (per state) or 2 (per edge).

    ``values[i, j]`` is the log-weight of the edge ``i -> j``; a depth-1
    potential is stored with rows constant.  Entries on forbidden edges are 0
    and never read.
    """

    values: np.ndarray
    depth: int = 2

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError("potential table must be square")
        if self.depth not in (1, 2):
            raise ValidationError(f"potential depth must be 1 or 2, got {self.depth}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("potential values must be finite")
        if self.depth == 1 and not np.all(v == v[:, :1]):
            raise ValidationError("depth-1 potential must not depend on the second symbol")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls, s: int) -> "Potential":
        return cls(np.zeros((s, s)), depth=1)

    @classmethod
    def from_states(cls, values: Sequence[float]) -> "Potential":
        v = np.asarray(values, dtype=float)
        return cls(np.repeat(v[:, None], len(v), axis=1), depth=1)

    @classmethod
    def from_edges(cls, shift: ShiftSystem, table) -> "Potential":
        """Depth-2 potential from an ``S x S`` array or a ``{(i, j): value}`` mapping."""
        s = shift.state_count
        if isinstance(table, dict):
            v = np.zeros((s, s))
            for (i, j), x in table.items():
                v[i, j] = x
        else:
            v = np.array(table, dtype=float)
        forbidden = ~shift.adjacency & (v != 0)
        if forbidden.any():
            i, j = map(int, np.argwhere(forbidden)[0])
            raise ValidationError(
                f"potential assigns a value to forbidden edge {shift.labels[i]}->{shift.labels[j]}"
            )
        return cls(v, depth=2)

    @property
    def state_count(self) -> int:
        return self.values.shape[0]

    def __call__(self, i: int, j: int) -> float:
        return float(self.values[i, j])

    def restricted(self, shift: ShiftSystem) -> np.ndarray:
        """Edge table with forbidden edges set to ``-inf`` (log of a zero weight)."""
        return np.where(shift.adjacency, self.values, -np.inf)

    def scaled(self, c: float) -> "Potential":
        return Potential(self.values * c, self.depth)

    def __add__(self, other: "Potential") -> "Potential":
        return Potential(self.values + other.values, max(self.depth, other.depth))


def birkhoff_sum(
    shift: ShiftSystem,
    potential: Potential,
    w: Sequence[int],
    periodic: bool = True,
    continuation: int | None = None,
) -> float:
    """Birkhoff sum of ``potential`` over the first ``len(w)`` shifts.

    For ``periodic=True`` the word is read cyclically, so the last term is the
    wrap edge ``w[-1] -> w[0]``.  Otherwise a depth-2 potential needs the symbol
    following ``w`` (``continuation``); depth 1 does not.
    """
    w = shift.check_word(w, periodic=periodic)
    v = potential.values
    n = len(w)
    total = sum(v[w[t], w[t + 1]] for t in range(n - 1))
    if periodic:
        nxt = w[0]
    elif potential.depth == 1:
        nxt = w[-1]
    else:
        if continuation is None:
            raise ValueError("depth-2 potential needs an explicit continuation symbol")
        if not shift.allowed(w[-1], continuation):
            raise ValidationError(
                f"continuation {shift.labels[continuation]} cannot follow {shift.labels[w[-1]]}"
            )
        nxt = continuation
    return float(total + v[w[-1], nxt])


def enumerate_words(shift: ShiftSystem, n: int, start: int | None = None) -> Iterator[Word]:
    """All allowed words of length ``n`` in lexicographic order."""
    s = shift.state_count
    succ = [tuple(int(k) for k in np.flatnonzero(shift.adjacency[i])) for i in range(s)]
    firsts = range(s) if start is None else (start,)

    def extend(prefix):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for k in succ[prefix[-1]]:
            prefix.append(k)
            yield from extend(prefix)
            prefix.pop()

    for a in firsts:
        yield from extend([a])


def enumerate_periodic(
    shift: ShiftSystem,
    n: int,
    predicate: Callable[[Word], bool] | None = None,
    ceiling: int = DEFAULT_ORACLE_CEILING,
) -> Iterator[Word]:
    """Words ``w`` of length ``n`` with ``w`` allowed and ``w[-1] -> w[0]`` allowed.

    These are in bijection with the points of period ``n``; there are
    ``trace(A**n)`` of them.  Order is lexicographic.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > ceiling:
        raise BudgetError(f"n={n} exceeds the enumeration ceiling {ceiling}; use matrix methods")
    a = shift.adjacency
    for w in enumerate_words(shift, n):
        if a[w[-1], w[0]] and (predicate is None or predicate(w)):
            yield w
