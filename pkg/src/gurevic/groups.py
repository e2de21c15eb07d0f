"""Group arithmetic for skew-product extensions.

Four built-in variants: ``Zd(d)``, ``FreeGroup(k)``, ``Heisenberg()`` and
``Cyclic(m)``.  Elements are canonical hashable values (tuples or ints) so they
can key the dynamic-programming tables; :class:`GroupElement` wraps a value
with its group for user-facing arithmetic.

Every group also has a fixed-width integer array encoding used by the
vectorised DP engine (``to_array``/``right_mul_array``/...).

Heisenberg convention: ``(a,b,c)(a',b',c') = (a+a', b+b', c+c'+a*b')``
(upper unitriangular integer matrices).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import BudgetError, ValidationError

DEFAULT_BALL_BUDGET = 5_000_000

_TOKEN = re.compile(r"^([A-Za-z][A-Za-z0-9]*)(?:\^(-?\d+))?$")


class Group:
    """Common interface; subclasses are frozen dataclasses (hashable by parameters)."""

    kind: str = ""

    # --- scalar arithmetic on canonical values -------------------------------
    @property
    def identity(self) -> Hashable:
        raise NotImplementedError

    @property
    def rank(self) -> int:
        """Rank ``d`` of the torsion-free abelianization."""
        raise NotImplementedError

    def mul(self, u, v):
        raise NotImplementedError

    def inv(self, u):
        raise NotImplementedError

    def abelianize(self, u) -> tuple[int, ...]:
        raise NotImplementedError

    def generators(self) -> list:
        """Generating set closed under inverses, in a fixed order."""
        raise NotImplementedError

    def length_lower_bound(self, u) -> int:
        """Cheap lower bound on the word length (exact except for Heisenberg)."""
        return self.word_length(u)

    def word_length(self, u) -> int:
        raise NotImplementedError

    def canonical(self, u):
        return u

    def power(self, u, k: int):
        if k < 0:
            u, k = self.inv(u), -k
        out = self.identity
        for _ in range(k):
            out = self.mul(out, u)
        return out

    def product(self, values: Iterable):
        out = self.identity
        for v in values:
            out = self.mul(out, v)
        return out

    # --- text ----------------------------------------------------------------
    def generator_names(self) -> dict[str, Hashable]:
        return {}

    def parse(self, text: str):
        text = text.strip()
        if text in ("", "e"):
            return self.identity
        names = self.generator_names()
        out = self.identity
        for tok in text.split():
            m = _TOKEN.match(tok)
            if not m or m.group(1) not in names:
                raise ValidationError(f"unknown generator {tok!r} for group {self}")
            if m.group(1) == "e":
                continue
            k = int(m.group(2)) if m.group(2) is not None else 1
            out = self.mul(out, self.power(names[m.group(1)], k))
        return out

    def format(self, u) -> str:
        return str(u)

    def element(self, value) -> "GroupElement":
        return GroupElement(self, self.canonical(value))

    # --- array encoding ------------------------------------------------------
    width: int = 1

    def max_array_word_length(self) -> float:
        return math.inf

    def to_array(self, values: Sequence) -> np.ndarray:
        raise NotImplementedError

    def from_array(self, row) -> Hashable:
        raise NotImplementedError

    def right_mul_array(self, x: np.ndarray, h) -> np.ndarray:
        raise NotImplementedError

    def inv_array(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def lower_bound_array(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def abelianize_array(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class GroupElement:
    """A group element tagged with its group; supports ``*``, ``inverse`` and ``==``."""

    group: Group
    value: Hashable

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        if not isinstance(other, GroupElement):
            return NotImplemented
        if other.group != self.group:
            raise TypeError(f"cannot multiply elements of {self.group} and {other.group}")
        return GroupElement(self.group, self.group.mul(self.value, other.value))

    def inverse(self) -> "GroupElement":
        return GroupElement(self.group, self.group.inv(self.value))

    def abelianize(self) -> tuple[int, ...]:
        return self.group.abelianize(self.value)

    def word_length(self) -> int:
        return self.group.word_length(self.value)

    @property
    def is_identity(self) -> bool:
        return self.value == self.group.identity

    def __str__(self) -> str:
        return self.group.format(self.value)


def group_op(g: GroupElement, h: GroupElement) -> GroupElement:
    return g * h


def group_inv(g: GroupElement) -> GroupElement:
    return g.inverse()


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Zd(Group):
    d: int = 1
    kind = "zd"

    def __post_init__(self):
        if self.d < 1:
            raise ValidationError("Z^d needs d >= 1")

    def __str__(self):
        return f"Z^{self.d}"

    @property
    def identity(self):
        return (0,) * self.d

    @property
    def rank(self):
        return self.d

    @property
    def width(self):
        return self.d

    def canonical(self, u):
        u = tuple(int(x) for x in (u if isinstance(u, (tuple, list)) else (u,)))
        if len(u) != self.d:
            raise ValidationError(f"Z^{self.d} element needs {self.d} coordinates, got {u}")
        return u

    def mul(self, u, v):
        return tuple(a + b for a, b in zip(u, v))

    def inv(self, u):
        return tuple(-a for a in u)

    def abelianize(self, u):
        return tuple(u)

    def generators(self):
        out = []
        for i in range(self.d):
            for s in (1, -1):
                e = [0] * self.d
                e[i] = s
                out.append(tuple(e))
        return out

    def word_length(self, u):
        return sum(abs(a) for a in u)

    def parse(self, text):
        text = text.strip()
        if text in ("e", ""):
            return self.identity
        try:
            return self.canonical([int(x) for x in text.split(",")])
        except ValueError:
            raise ValidationError(f"bad Z^{self.d} element {text!r}; expected comma-separated integers") from None

    def format(self, u):
        return ",".join(str(a) for a in u)

    def to_array(self, values):
        return np.array(values, dtype=np.int64).reshape(-1, self.d)

    def from_array(self, row):
        return tuple(int(x) for x in row)

    def right_mul_array(self, x, h):
        return x + np.asarray(h, dtype=np.int64)

    def inv_array(self, x):
        return -x

    def lower_bound_array(self, x):
        return np.abs(x).sum(axis=1)

    def abelianize_array(self, x):
        return x


@dataclass(frozen=True)
class Cyclic(Group):
    m: int = 2
    kind = "cyclic"

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError("cyclic group order must be >= 1")

    def __str__(self):
        return f"Z/{self.m}"

    @property
    def identity(self):
        return 0

    @property
    def rank(self):
        return 0

    def canonical(self, u):
        if isinstance(u, (tuple, list)):
            (u,) = u
        return int(u) % self.m

    def mul(self, u, v):
        return (u + v) % self.m

    def inv(self, u):
        return (-u) % self.m

    def abelianize(self, u):
        return ()

    def generators(self):
        return [1 % self.m, (-1) % self.m]

    def word_length(self, u):
        return min(u, self.m - u)

    def generator_names(self):
        return {"x": 1 % self.m, "e": 0}

    def parse(self, text):
        text = text.strip()
        try:
            return int(text) % self.m
        except ValueError:
            return Group.parse(self, text)

    def to_array(self, values):
        return np.array(values, dtype=np.int64).reshape(-1, 1)

    def from_array(self, row):
        return int(row[0])

    def right_mul_array(self, x, h):
        return (x + h) % self.m

    def inv_array(self, x):
        return (-x) % self.m

    def lower_bound_array(self, x):
        r = x[:, 0]
        return np.minimum(r, self.m - r)

    def abelianize_array(self, x):
        return np.zeros((x.shape[0], 0), dtype=np.int64)


@dataclass(frozen=True)
class Heisenberg(Group):
    kind = "heisenberg"

    def __str__(self):
        return "H3(Z)"

    @property
    def identity(self):
        return (0, 0, 0)

    @property
    def rank(self):
        return 2

    @property
    def width(self):
        return 3

    def canonical(self, u):
        u = tuple(int(x) for x in u)
        if len(u) != 3:
            raise ValidationError(f"Heisenberg element needs 3 coordinates, got {u}")
        return u

    def mul(self, u, v):
        return (u[0] + v[0], u[1] + v[1], u[2] + v[2] + u[0] * v[1])

    def inv(self, u):
        a, b, c = u
        return (-a, -b, a * b - c)

    def abelianize(self, u):
        return (u[0], u[1])

    def generators(self):
        return [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)]

    def generator_names(self):
        return {"x": (1, 0, 0), "y": (0, 1, 0), "e": (0, 0, 0)}

    def parse(self, text):
        if "," in text:
            try:
                return self.canonical([int(x) for x in text.split(",")])
            except ValueError:
                raise ValidationError(f"bad Heisenberg triple {text!r}") from None
        return Group.parse(self, text)

    def length_lower_bound(self, u):
        a, b, c = u
        # a word of length L has |c| <= (#x letters)(#y letters) <= L^2/4
        return max(abs(a) + abs(b), math.ceil(2 * math.sqrt(abs(c))))

    def word_length(self, u):
        r = self.length_lower_bound(u)
        while True:
            table = distance_table(self, r)
            if u in table:
                return table[u]
            r += 1

    def format(self, u):
        return ",".join(str(a) for a in u)

    def to_array(self, values):
        return np.array(values, dtype=np.int64).reshape(-1, 3)

    def from_array(self, row):
        return tuple(int(x) for x in row)

    def right_mul_array(self, x, h):
        a, b, c = h
        out = x.copy()
        out[:, 2] += c + x[:, 0] * b
        out[:, 0] += a
        out[:, 1] += b
        return out

    def inv_array(self, x):
        out = np.empty_like(x)
        out[:, 0] = -x[:, 0]
        out[:, 1] = -x[:, 1]
        out[:, 2] = x[:, 0] * x[:, 1] - x[:, 2]
        return out

    def lower_bound_array(self, x):
        ab = np.abs(x[:, 0]) + np.abs(x[:, 1])
        c = np.abs(x[:, 2])
        r = np.ceil(2 * np.sqrt(c.astype(float))).astype(np.int64)
        # guard against sqrt rounding: smallest r with r*r >= 4|c|
        r = np.where((r - 1) * (r - 1) >= 4 * c, r - 1, r)
        return np.maximum(ab, r)

    def abelianize_array(self, x):
        return x[:, :2]


@dataclass(frozen=True)
class FreeGroup(Group):
    """Free group on ``g1..gk``; reduced words stored as tuples of ``+-i``."""

    k: int = 2
    kind = "free"

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("free group rank must be >= 1")

    def __str__(self):
        return f"F{self.k}"

    @property
    def identity(self):
        return ()

    @property
    def rank(self):
        return self.k

    def canonical(self, u):
        return self.reduce(tuple(int(x) for x in u))

    def reduce(self, letters: Sequence[int]) -> tuple[int, ...]:
        out: list[int] = []
        for x in letters:
            if x == 0 or abs(x) > self.k:
                raise ValidationError(f"letter {x} out of range for F{self.k}")
            if out and out[-1] == -x:
                out.pop()
            else:
                out.append(x)
        return tuple(out)

    def mul(self, u, v):
        # u, v reduced: cancel at the junction only
        i = 0
        n = min(len(u), len(v))
        while i < n and u[len(u) - 1 - i] == -v[i]:
            i += 1
        return u[: len(u) - i] + v[i:]

    def inv(self, u):
        return tuple(-x for x in reversed(u))

    def abelianize(self, u):
        out = [0] * self.k
        for x in u:
            out[abs(x) - 1] += 1 if x > 0 else -1
        return tuple(out)

    def generators(self):
        out = []
        for i in range(1, self.k + 1):
            out += [(i,), (-i,)]
        return out

    def word_length(self, u):
        return len(u)

    def generator_names(self):
        names = {f"g{i}": (i,) for i in range(1, self.k + 1)}
        for i, alias in enumerate("xyz"[: self.k], start=1):
            names[alias] = (i,)
        names["e"] = ()
        return names

    def format(self, u):
        if not u:
            return "e"
        return " ".join(f"g{abs(x)}" + ("^-1" if x < 0 else "") for x in u)

    # reduced word <-> integer in base 2k+1, last letter in the lowest digit
    @property
    def _base(self):
        return 2 * self.k + 1

    def _code(self, x):
        return x if x > 0 else self.k - x

    def _letter(self, c):
        return c if c <= self.k else -(c - self.k)

    def max_array_word_length(self):
        return math.floor(62 / math.log2(self._base))

    def to_array(self, values):
        out = []
        for u in values:
            if len(u) > self.max_array_word_length():
                raise BudgetError(f"F{self.k} word of length {len(u)} exceeds the integer encoding")
            key = 0
            for x in u:
                key = key * self._base + self._code(x)
            out.append(key)
        return np.array(out, dtype=np.int64).reshape(-1, 1)

    def from_array(self, row):
        key = int(row[0])
        letters = []
        while key:
            key, c = divmod(key, self._base)
            letters.append(self._letter(c))
        return tuple(reversed(letters))

    def right_mul_array(self, x, h):
        b = self._base
        key = x[:, 0].copy()
        for letter in h:
            code = self._code(letter)
            cancel = key % b == self._code(-letter)
            key = np.where(cancel, key // b, key * b + code)
        return key[:, None]

    def inv_array(self, x):
        b, k = self._base, self.k
        key = x[:, 0].copy()
        out = np.zeros_like(key)
        while np.any(key):
            c = key % b
            inv = np.where(c == 0, 0, np.where(c <= k, c + k, c - k))
            nz = key > 0
            out = np.where(nz, out * b + inv, out)
            key //= b
        return out[:, None]

    def lower_bound_array(self, x):
        key = x[:, 0].copy()
        n = np.zeros_like(key)
        while np.any(key):
            n += key > 0
            key //= self._base
        return n

    def abelianize_array(self, x):
        key = x[:, 0].copy()
        out = np.zeros((key.shape[0], self.k), dtype=np.int64)
        while np.any(key):
            c = key % self._base
            for i in range(1, self.k + 1):
                out[:, i - 1] += (c == i).astype(np.int64) - (c == i + self.k).astype(np.int64)
            key //= self._base
        return out


@dataclass(frozen=True)
class Cocycle:
    """State-indexed cocycle: ``psi(x) = values[x_1]``."""

    group: Group
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.group.canonical(v) for v in self.values))

    @classmethod
    def trivial(cls, s: int, group: Group | None = None) -> "Cocycle":
        group = group or Cyclic(1)
        return cls(group, (group.identity,) * s)

    @property
    def state_count(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> GroupElement:
        return GroupElement(self.group, self.values[i])

    def product(self, w: Sequence[int]):
        """Canonical value of ``psi(w_1) psi(w_2) ... psi(w_n)``."""
        return self.group.product(self.values[i] for i in w)

    def abelianized(self) -> np.ndarray:
        """``S x d`` integer array of abelianized values (the coordinates ``f``)."""
        d = self.group.rank
        return np.array([self.group.abelianize(v) for v in self.values], dtype=np.int64).reshape(-1, d)

    def max_length(self) -> int:
        return max(self.group.word_length(v) for v in self.values)

    def distinct(self) -> list[tuple[object, np.ndarray]]:
        """``(value, states)`` pairs grouping states by cocycle value, in first-seen order."""
        order: dict = {}
        for i, v in enumerate(self.values):
            order.setdefault(v, []).append(i)
        return [(v, np.array(ix, dtype=np.int64)) for v, ix in order.items()]


def cocycle_product(c: Cocycle, shift, w: Sequence[int], periodic: bool = False) -> GroupElement:
    """``psi_n`` along an allowed word; ``periodic`` only asserts the wrap edge exists."""
    w = shift.check_word(w, periodic=periodic)
    if c.state_count != shift.state_count:
        raise ValidationError("cocycle and shift have different state counts")
    return GroupElement(c.group, c.product(w))


def make_group(text: str) -> Group:
    """Build a group from its config name: ``zd <d>``, ``free <k>``, ``heisenberg``, ``cyclic <m>``."""
    parts = text.split()
    if not parts:
        raise ValidationError("empty group name")
    name, args = parts[0].lower(), parts[1:]
    try:
        if name == "zd":
            return Zd(int(args[0]) if args else 1)
        if name == "free":
            return FreeGroup(int(args[0]) if args else 2)
        if name == "heisenberg" and not args:
            return Heisenberg()
        if name == "cyclic":
            return Cyclic(int(args[0]))
        if name == "trivial" and not args:
            return Cyclic(1)
    except (ValueError, IndexError):
        pass
    raise ValidationError(f"unknown group {text!r}; expected zd <d>, free <k>, heisenberg or cyclic <m>")


@lru_cache(maxsize=64)
def distance_table(group: Group, radius: int, budget: int = DEFAULT_BALL_BUDGET) -> dict:
    """Word-length of every element of the ball of ``radius``, by breadth-first search."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius > 0:
        # reuse the previous radius when available
        prev = distance_table(group, radius - 1, budget)
        table = dict(prev)
        frontier = [u for u, r in prev.items() if r == radius - 1]
    else:
        return {group.identity: 0}
    gens = group.generators()
    for u in frontier:
        for g in gens:
            v = group.mul(u, g)
            if v not in table:
                table[v] = radius
                if len(table) > budget:
                    raise BudgetError(f"ball of radius {radius} in {group} exceeds {budget} elements")
    return table


def ball(group: Group, radius: int, budget: int = DEFAULT_BALL_BUDGET) -> frozenset:
    """All elements of word length ``<= radius`` for the fixed generating set."""
    return frozenset(distance_table(group, radius, budget))
