"""Group-constrained orbit sums for skew-product extensions.

The central object is the weighted count

    Z_n = sum over x in Lambda(n) of exp(phi^n(x))

for the four families of constrained sets (periodic points or preimages of a
base point, optionally restricted to a cylinder) with ``psi_n(x)`` equal to a
target element.  Three routes compute it:

* a forward dynamic programme over ``(state, group element)`` pairs, either
  vectorised over integer-encoded elements (``engine="array"``) or with plain
  dictionaries (``engine="dict"``, the reference);
* Fourier inversion over the torus for ``Z^d`` cocycles;
* the distance-from-identity chain for free groups with a constant potential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterator, Sequence

import numpy as np

from .errors import BudgetError, ValidationError
from .groups import Cocycle, FreeGroup, Group, GroupElement, Zd
from .shift import Potential, ShiftSystem
from .transfer import build_operator, pressure

DEFAULT_BUDGET_ENTRIES = 200_000_000
DEFAULT_N_CAPS = {"free": 14, "heisenberg": 40, "zd": 400, "cyclic": None}

VERIFIED, ASSUMED, FAILED = "verified", "assumed", "failed"


@dataclass(frozen=True)
class Budget:
    entries: int = DEFAULT_BUDGET_ENTRIES
    n_caps: tuple = tuple(DEFAULT_N_CAPS.items())

    def cap(self, kind: str) -> int | None:
        return dict(self.n_caps).get(kind)


DEFAULT_BUDGET = Budget()


# --- systems and modes -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SkewSystem:
    shift: ShiftSystem
    potential: Potential
    cocycle: Cocycle
    mixing_status: str = ASSUMED
    mixing_certificate: "MixingCertificate | None" = None

    def __post_init__(self):
        s = self.shift.state_count
        if self.cocycle.state_count != s:
            raise ValidationError(f"cocycle has {self.cocycle.state_count} values for {s} states")
        if self.potential.state_count != s:
            raise ValidationError("potential and shift have different state counts")

    @property
    def group(self) -> Group:
        return self.cocycle.group

    @property
    def d(self) -> int:
        return self.group.rank

    @property
    def f(self) -> np.ndarray:
        """Abelianized cocycle as an ``S x d`` integer array."""
        return self.cocycle.abelianized()

    def abelianized(self) -> "SkewSystem":
        """The same base with the cocycle pushed to ``Z^d`` (trivial group if ``d = 0``)."""
        if self.d == 0:
            return SkewSystem(self.shift, self.potential, Cocycle.trivial(self.shift.state_count))
        return SkewSystem(self.shift, self.potential, Cocycle(Zd(self.d), tuple(map(tuple, self.f))))

    def with_certificate(self, cert: "MixingCertificate") -> "SkewSystem":
        return SkewSystem(self.shift, self.potential, self.cocycle, cert.status, cert)


@dataclass(frozen=True)
class BasePoint:
    """Eventually periodic point ``prefix + period + period + ...`` (0-based states)."""

    prefix: tuple = ()
    period: tuple = (0,)

    def __post_init__(self):
        if not self.period:
            raise ValidationError("base point needs a non-empty periodic part")

    @property
    def first(self) -> int:
        return (self.prefix + self.period)[0]

    def check(self, shift: ShiftSystem) -> "BasePoint":
        shift.check_word(self.prefix + self.period + self.period[:1])
        return self

    def __str__(self) -> str:
        head = " ".join(str(x + 1) for x in self.prefix)
        tail = " ".join(str(x + 1) for x in self.period)
        return (head + " " if head else "") + f"({tail})"


@dataclass(frozen=True)
class PeriodicAll:
    target: Hashable = None
    name = "periodic"


@dataclass(frozen=True)
class PeriodicCylinder:
    a: int
    target: Hashable = None
    name = "periodic-cylinder"


@dataclass(frozen=True)
class Preimage:
    o: BasePoint
    target: Hashable = None
    name = "preimage"


@dataclass(frozen=True)
class PreimageCylinder:
    a: int
    o: BasePoint
    target: Hashable = None
    name = "preimage-cylinder"


Mode = PeriodicAll | PeriodicCylinder | Preimage | PreimageCylinder


def _target(group: Group, target) -> Hashable:
    if target is None:
        return group.identity
    if isinstance(target, GroupElement):
        if target.group != group:
            raise ValidationError(f"target lies in {target.group}, cocycle in {group}")
        return target.value
    return group.canonical(target)


def _mode_setup(mode: Mode, s: int):
    """Initial start rows and the read-out ``(C, R, S) -> (C,)`` for a mode."""
    if isinstance(mode, PeriodicAll):
        v0 = np.identity(s)

        def read(v):
            return np.trace(v, axis1=-2, axis2=-1)

    elif isinstance(mode, PeriodicCylinder):
        v0 = np.zeros((1, s))
        v0[0, mode.a] = 1.0

        def read(v):
            return v[..., 0, mode.a]

    elif isinstance(mode, (Preimage, PreimageCylinder)):
        o1 = mode.o.first
        if isinstance(mode, Preimage):
            v0 = np.ones((1, s))
        else:
            v0 = np.zeros((1, s))
            v0[0, mode.a] = 1.0

        def read(v):
            return v[..., 0, o1]

    else:
        raise TypeError(f"unknown constraint mode {mode!r}")
    return v0, read


# --- DP layers -------------------------------------------------------------------


@dataclass
class _EdgeClass:
    sources: np.ndarray  # source states
    increment: Hashable  # group value multiplied on the right
    extra: tuple  # increment of the auxiliary count coordinates
    weights: np.ndarray  # |sources| x S
    gweights: np.ndarray | None  # weights * g(i, j), for the accumulator channel


def _edge_classes(sys: SkewSystem, weights: np.ndarray, g=None, count_values=None) -> list[_EdgeClass]:
    out = []
    gt = None if g is None else np.asarray(getattr(g, "values", g), dtype=float)
    for h, ix in sys.cocycle.distinct():
        w = weights[ix]
        if count_values is None:
            out.append(_EdgeClass(ix, h, (), w, None if gt is None else w * gt[ix]))
            continue
        gv = np.asarray(getattr(count_values[0], "values", count_values[0]), dtype=float)[ix]
        levels = count_values[1]
        for q, val in enumerate(levels):
            mask = gv == val
            wq = np.where(mask, w, 0.0)
            if not wq.any():
                continue
            extra = tuple(1 if (k == q and val != 0) else 0 for k in range(len(levels)))
            out.append(_EdgeClass(ix, h, extra, wq, None))
    return out


@dataclass
class Layer:
    """DP state after ``step`` transitions.

    ``values`` has shape ``(m, C, R, S)`` (rows, channels, start rows, current
    state) and is scaled by ``exp(log_scale)``.
    """

    step: int
    elements: list  # canonical group values, one per row
    extras: np.ndarray  # (m, x) auxiliary integer coordinates
    values: np.ndarray
    log_scale: float

    @property
    def size(self) -> int:
        return len(self.elements)

    def rows_for(self, target) -> np.ndarray:
        return np.array([e == target for e in self.elements], dtype=bool)


def _check_caps(sys: SkewSystem, horizon: int, budget: Budget):
    cap = budget.cap(sys.group.kind)
    if cap is not None and horizon > cap and sys.group.kind != "cyclic":
        hint = {"zd": "use the Fourier path", "free": "use the radial path"}.get(sys.group.kind, "lower n")
        raise BudgetError(f"{sys.group} DP capped at n={cap} (requested {horizon}); {hint}")


def _prune_distance(group: Group, x_arr: np.ndarray, targets_arr: list) -> np.ndarray:
    inv = group.inv_array(x_arr)
    best = None
    for t in targets_arr:
        lb = group.lower_bound_array(group.right_mul_array(inv, t))
        best = lb if best is None else np.minimum(best, lb)
    return best


def _combine(keys: np.ndarray, values: np.ndarray):
    """Sum ``values`` rows sharing the same integer key row."""
    if keys.shape[0] == 0:
        return keys, values
    if keys.shape[1] == 1:
        code = keys[:, 0]
    else:
        lo = keys.min(axis=0)
        span = keys.max(axis=0) - lo + 1
        if np.prod(span.astype(float)) < 2.0**62:
            stride = np.cumprod(np.concatenate([[1], span[::-1][:-1]]))[::-1]
            code = (keys - lo) @ stride
        else:
            _, code = np.unique(keys, axis=0, return_inverse=True)
            code = code.ravel()
    order = np.argsort(code, kind="stable")
    cs = code[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(cs)) + 1])
    return keys[order][starts], np.add.reduceat(values[order], starts, axis=0)


def dp_layers(
    sys: SkewSystem,
    horizon: int,
    mode: Mode,
    targets: Sequence | None = None,
    g=None,
    count_values=None,
    prune: bool = True,
    engine: str = "auto",
    budget: Budget = DEFAULT_BUDGET,
) -> Iterator[Layer]:
    """Forward DP over ``(state, group element)``; yields a :class:`Layer` per step.

    Elements that cannot reach any of ``targets`` within the remaining
    ``horizon - step`` steps are dropped, which leaves every reachable value
    exact.  ``g`` adds an accumulator channel carrying ``g``-weighted mass;
    ``count_values=(table, levels)`` adds integer coordinates counting edges on
    which ``table`` takes each value in ``levels``.
    """
    _check_caps(sys, horizon, budget)
    group = sys.group
    targets = [_target(group, t) for t in (targets if targets is not None else [mode.target])]
    s = sys.shift.state_count
    weights = np.where(sys.shift.adjacency, np.exp(sys.potential.values), 0.0)
    classes = _edge_classes(sys, weights, g, count_values)
    v0, _ = _mode_setup(mode, s)
    channels = 2 if g is not None else 1
    n_extra = 0 if count_values is None else len(count_values[1])
    lmax = max(1, sys.cocycle.max_length())
    if engine == "auto":
        engine = "array" if horizon * lmax <= group.max_array_word_length() else "dict"
    if engine == "array":
        yield from _dp_array(sys, horizon, v0, targets, classes, channels, n_extra, prune, lmax, budget)
    elif engine == "dict":
        yield from _dp_dict(sys, horizon, v0, targets, classes, channels, n_extra, prune, lmax, budget)
    else:
        raise ValueError(f"unknown engine {engine!r}")


def _dp_array(sys, horizon, v0, targets, classes, channels, n_extra, prune, lmax, budget):
    group = sys.group
    if horizon * lmax > group.max_array_word_length():
        raise BudgetError(f"{group} elements of length {horizon * lmax} overflow the integer encoding")
    r, s = v0.shape
    keys = group.to_array([group.identity])
    extras = np.zeros((1, n_extra), dtype=np.int64)
    vals = np.zeros((1, channels, r, s))
    vals[0, 0] = v0
    log_scale = 0.0
    targets_arr = [t for t in targets]
    w = keys.shape[1]
    for k in range(1, horizon + 1):
        new_keys, new_vals = [], []
        for ec in classes:
            mass = vals[:, 0][:, :, ec.sources]
            v = np.empty((vals.shape[0], channels, r, s))
            v[:, 0] = mass @ ec.weights
            if channels == 2:
                v[:, 1] = vals[:, 1][:, :, ec.sources] @ ec.weights + mass @ ec.gweights
            kk = group.right_mul_array(keys, ec.increment)
            ex = extras + np.asarray(ec.extra, dtype=np.int64) if n_extra else extras
            new_keys.append(np.hstack([kk, ex]) if n_extra else kk)
            new_vals.append(v)
        keys_all = np.concatenate(new_keys)
        vals_all = np.concatenate(new_vals)
        nz = (vals_all != 0).reshape(vals_all.shape[0], -1).any(axis=1) if len(vals_all) else np.zeros(0, bool)
        if prune:
            dist = _prune_distance(group, keys_all[:, :w], targets_arr)
            nz &= dist <= (horizon - k) * lmax
        keys_all, vals_all = keys_all[nz], vals_all[nz]
        if vals_all.size > budget.entries:
            raise BudgetError(f"DP layer at step {k} needs {vals_all.size} entries (budget {budget.entries})")
        keys_all, vals_all = _combine(keys_all, vals_all)
        scale = np.abs(vals_all).max() if vals_all.size else 0.0
        if scale > 0:
            vals_all = vals_all / scale
            log_scale += math.log(scale)
        keys, extras = keys_all[:, :w], keys_all[:, w:]
        vals = vals_all
        yield _ArrayLayer(k, keys, extras, vals, log_scale, group)


class _ArrayLayer(Layer):
    def __init__(self, step, keys, extras, values, log_scale, group):
        self.step = step
        self.keys = keys
        self.extras = extras
        self.values = values
        self.log_scale = log_scale
        self.group = group

    @property
    def elements(self):
        return [self.group.from_array(row) for row in self.keys]

    @property
    def size(self):
        return self.keys.shape[0]

    def rows_for(self, target):
        t = self.group.to_array([target])[0]
        return np.all(self.keys == t, axis=1)


def _dp_dict(sys, horizon, v0, targets, classes, channels, n_extra, prune, lmax, budget):
    group = sys.group
    r, s = v0.shape
    start = np.zeros((channels, r, s))
    start[0] = v0
    layer = {(group.identity, (0,) * n_extra): start}
    log_scale = 0.0
    for k in range(1, horizon + 1):
        new: dict = {}
        rem = (horizon - k) * lmax
        for (u, ex), val in layer.items():
            for ec in classes:
                x = group.mul(u, ec.increment)
                if prune and min(group.length_lower_bound(group.mul(group.inv(x), t)) for t in targets) > rem:
                    continue
                mass = val[0][:, ec.sources]
                v = np.empty((channels, r, s))
                v[0] = mass @ ec.weights
                if channels == 2:
                    v[1] = val[1][:, ec.sources] @ ec.weights + mass @ ec.gweights
                if not v.any():
                    continue
                key = (x, tuple(a + b for a, b in zip(ex, ec.extra)))
                if key in new:
                    new[key] += v
                else:
                    new[key] = v
        if len(new) * channels * r * s > budget.entries:
            raise BudgetError(f"DP layer at step {k} exceeds the entry budget {budget.entries}")
        scale = max((np.abs(v).max() for v in new.values()), default=0.0)
        if scale > 0:
            for key in new:
                new[key] /= scale
            log_scale += math.log(scale)
        layer = new
        items = list(layer.items())
        elements = [u for (u, _), _ in items]
        extras = np.array([ex for (_, ex), _ in items], dtype=np.int64).reshape(len(items), n_extra)
        values = np.array([v for _, v in items]).reshape(len(items), channels, r, s)
        yield Layer(k, elements, extras, values, log_scale)


# --- constrained sums ---------------------------------------------------------------


@dataclass
class ConstrainedSumTable:
    """``log Z_n`` for ``n = 1..n_max`` (``-inf`` where the set is empty).

    ``log_cylinder`` holds, for periodic modes, the per-start-state sums
    ``log Z_n^a`` (the supermultiplicative sequences used for certified lower
    bounds).  ``g_mean`` is the accumulator read-out when a test function was
    supplied.
    """

    n: np.ndarray
    log_z: np.ndarray
    method: str
    ball_size: np.ndarray
    log_cylinder: np.ndarray | None = None
    g_mean: np.ndarray | None = None

    @property
    def values(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_z)

    def rate(self) -> np.ndarray:
        return self.log_z / self.n

    def rows(self) -> list[tuple]:
        out = []
        for n, lz, b in zip(self.n, self.log_z, self.ball_size):
            z = math.exp(lz) if lz < 700 else math.inf
            out.append((int(n), z, lz / n, self.method, int(b)))
        return out


def _safe_log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def constrained_table(
    sys: SkewSystem,
    n_max: int,
    mode: Mode | None = None,
    g=None,
    engine: str = "auto",
    budget: Budget = DEFAULT_BUDGET,
) -> ConstrainedSumTable:
    """Constrained sums for every ``n <= n_max`` from one DP run."""
    mode = mode or PeriodicAll()
    s = sys.shift.state_count
    _, read = _mode_setup(mode, s)
    target = _target(sys.group, mode.target)
    log_z, sizes, cyl, gm = [], [], [], []
    for layer in dp_layers(sys, n_max, mode, g=g, engine=engine, budget=budget):
        rows = layer.rows_for(target)
        v = layer.values[rows].sum(axis=0) if rows.any() else np.zeros(layer.values.shape[1:])
        z = read(v)
        log_z.append(_safe_log(float(z[0])) + layer.log_scale)
        sizes.append(layer.size)
        if isinstance(mode, PeriodicAll):
            diag = np.diagonal(v[0])
            cyl.append([_safe_log(float(x)) + layer.log_scale for x in diag])
        elif isinstance(mode, PeriodicCylinder):
            cyl.append([_safe_log(float(z[0])) + layer.log_scale])
        if g is not None:
            gm.append(float(z[1]) / (layer.step * float(z[0])) if z[0] > 0 else math.nan)
    return ConstrainedSumTable(
        n=np.arange(1, n_max + 1),
        log_z=np.array(log_z),
        method="dp",
        ball_size=np.array(sizes),
        log_cylinder=np.array(cyl) if cyl else None,
        g_mean=np.array(gm) if g is not None else None,
    )


def constrained_sum(sys: SkewSystem, n: int, mode: Mode | None = None, **kw) -> float:
    """Exact weighted count ``Z_n`` of the constrained set (forward DP)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lz = constrained_table(sys, n, mode, **kw).log_z[-1]
    return math.exp(lz) if lz > -math.inf else 0.0


# --- free group radial chain ----------------------------------------------------------


def radial_preconditions(sys: SkewSystem) -> str | None:
    """``None`` if the radial chain applies, else the reason it does not."""
    group = sys.group
    if not isinstance(group, FreeGroup):
        return "cocycle is not free-group valued"
    s = sys.shift.state_count
    if s != 2 * group.k or not sys.shift.adjacency.all():
        return "base must be the full shift on 2k symbols"
    if sorted(sys.cocycle.values) != sorted(group.generators()):
        return "cocycle must map states bijectively onto generators and inverses"
    v = sys.potential.values
    if not np.all(v == v[0, 0]):
        return "radial chain needs a constant potential"
    return None


def radial_log_sums(sys: SkewSystem, n_max: int) -> np.ndarray:
    """``log Z_n(e)`` for ``n = 1..n_max`` via the distance-from-identity chain."""
    why = radial_preconditions(sys)
    if why is not None:
        raise ValidationError(f"radial path unavailable: {why}; use constrained_sum")
    k2 = 2 * sys.group.k
    c = float(sys.potential.values[0, 0])
    v = np.zeros(n_max + 2)
    v[0] = 1.0
    log_scale = 0.0
    out = np.empty(n_max)
    for n in range(1, n_max + 1):
        new = np.zeros_like(v)
        new[0] = v[1]
        new[1] = k2 * v[0] + v[2]
        new[2:-1] = (k2 - 1) * v[1:-2] + v[3:]
        scale = new.max()
        v = new / scale
        log_scale += math.log(scale)
        out[n - 1] = (math.log(v[0]) + log_scale if v[0] > 0 else -math.inf) + c * n
    return out


def free_group_radial_sum(sys: SkewSystem, n: int) -> float:
    lz = radial_log_sums(sys, n)[-1]
    return math.exp(lz) if lz > -math.inf else 0.0


# --- Fourier path ----------------------------------------------------------------------


def fourier_log_diagonals(
    sys: SkewSystem,
    n_max: int,
    m=None,
    q: int | None = None,
    w=None,
    budget: Budget = DEFAULT_BUDGET,
) -> np.ndarray:
    """``log Z_n^a(m)`` for ``n = 1..n_max`` and every state ``a`` (shape ``n_max x S``).

    ``Z_n^a(m) = exp(-<w, m>) * mean_t M_{w + 2 pi i t}^n[a, a] exp(-2 pi i <t, m>)``
    on a uniform ``q^d`` grid, exact once ``q >= 2 n_max max|f| + 1``.  ``w`` is
    an optional real tilt (typically ``xi``) that keeps the integrand well
    scaled.  Sums below the quadrature noise floor are reported as ``-inf``.
    """
    if not isinstance(sys.group, Zd):
        raise ValidationError("Fourier path needs a Z^d cocycle")
    f = sys.f
    d = f.shape[1]
    m = np.zeros(d, dtype=np.int64) if m is None else np.asarray(m, dtype=np.int64).reshape(d)
    fmax = int(np.abs(f).max()) if f.size else 0
    nyquist = 2 * n_max * fmax + 1
    q = nyquist if q is None else q
    if q < nyquist:
        raise ValueError(f"Q={q} below the aliasing limit {nyquist} for n={n_max}; result would alias")
    s = sys.shift.state_count
    if q**d * s * s > budget.entries:
        raise BudgetError(f"Fourier grid {q}^{d} x {s}^2 exceeds the entry budget {budget.entries}")
    w = np.zeros(d) if w is None else np.asarray(w, dtype=float).reshape(d)
    base = build_operator(sys.shift, sys.potential, f, w).matrix.real
    lam_log = pressure(sys.shift, sys.potential, w, f) if sys.shift.transitive else 0.0
    base = base / math.exp(lam_log)
    t, weight = _half_grid(d, q)
    phase = np.exp(2j * math.pi * (t @ f.T))  # (G, S)
    mats = base[None, :, :] * phase[:, :, None]
    char = weight * np.exp(-2j * math.pi * (t @ m)) / q**d
    out = np.full((n_max, s), -math.inf)
    p = mats.copy()
    for n in range(1, n_max + 1):
        if np.abs(m).max(initial=0) <= n * fmax:
            diag = np.diagonal(p, axis1=1, axis2=2)  # (G, S)
            z = np.real(char @ diag)
            floor = 1e-11 * max(1.0, float(np.abs(diag).max()))
            ok = z > floor
            out[n - 1, ok] = np.log(z[ok]) + n * lam_log - float(w @ m)
        if n < n_max:
            p = p @ mats
    return out


def _half_grid(d: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Grid points up to the symmetry ``t -> -t`` with multiplicities 1 or 2.

    The integrand at ``-t`` is the complex conjugate of the one at ``t`` (real
    base matrix, integer ``f`` and ``m``), so real parts of weighted sums over
    the half grid equal sums over the full grid.
    """
    idx = np.stack(np.meshgrid(*[np.arange(q)] * d, indexing="ij"), axis=-1).reshape(-1, d)
    flat = np.ravel_multi_index(idx.T, (q,) * d) if d else np.zeros(1, dtype=np.int64)
    neg = np.ravel_multi_index(((-idx) % q).T, (q,) * d) if d else flat
    keep = flat <= neg
    return idx[keep] / q, np.where(flat[keep] == neg[keep], 1.0, 2.0)


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    top = a.max(axis=1)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        return np.log(np.exp(a - safe[:, None]).sum(axis=1)) + safe


def fourier_log_sums(sys: SkewSystem, n_max: int, m=None, q: int | None = None, w=None, cylinder: int | None = None, budget: Budget = DEFAULT_BUDGET) -> np.ndarray:
    """``log Z_n(m)`` (trace, or the single cylinder ``a``) for ``n = 1..n_max``."""
    diag = fourier_log_diagonals(sys, n_max, m, q, w, budget)
    return diag[:, cylinder] if cylinder is not None else _logsumexp_rows(diag)


def fourier_constrained_sum(sys: SkewSystem, n: int, m=None, q: int | None = None, w=None) -> float:
    """Constrained periodic sum ``Z_n(m)`` for a ``Z^d`` cocycle via the torus integral."""
    f = sys.f
    fmax = int(np.abs(f).max()) if f.size else 0
    if m is not None and np.abs(np.asarray(m)).max(initial=0) > n * fmax:
        return 0.0
    lz = fourier_log_sums(sys, n, m, q, w)[-1]
    return math.exp(lz) if lz > -math.inf else 0.0


# --- mixing certificate ---------------------------------------------------------------


def _hermite_basis(vectors: list) -> np.ndarray:
    """Row-echelon integer basis of the lattice spanned by ``vectors``."""
    rows = [list(map(int, v)) for v in vectors if any(v)]
    if not rows:
        return np.zeros((0, 0), dtype=object)
    ncol = len(rows[0])
    basis = []
    col = 0
    while rows and col < ncol:
        nz = [r for r in rows if r[col] != 0]
        zero = [r for r in rows if r[col] == 0]
        if not nz:
            col += 1
            continue
        while len(nz) > 1:
            nz.sort(key=lambda r: abs(r[col]))
            piv = nz[0]
            rest = []
            for r in nz[1:]:
                q = r[col] // piv[col]
                r2 = [a - q * b for a, b in zip(r, piv)]
                if r2[col] != 0:
                    rest.append(r2)
                elif any(r2):
                    zero.append(r2)
            nz = [piv] + rest
        piv = nz[0]
        if piv[col] < 0:
            piv = [-a for a in piv]
        basis.append(piv)
        rows = zero
        col += 1
    return np.array(basis, dtype=object)


def lattice_index(basis: np.ndarray, dim: int) -> float:
    """Index of the lattice in ``Z^dim`` (``inf`` if not of full rank)."""
    if len(basis) < dim:
        return math.inf
    idx = 1
    for i, row in enumerate(basis):
        idx *= abs(int(row[i]))
    return float(idx)


@dataclass
class MixingCertificate:
    status: str
    horizon: int
    lattice_basis: list = field(default_factory=list)
    lattice_index: float = math.inf
    method: str = "lattice"
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "horizon": self.horizon,
            "lattice_basis": [[int(a) for a in r] for r in self.lattice_basis],
            "lattice_index": self.lattice_index,
            "method": self.method,
            "detail": self.detail,
        }


def _closed_walk_vectors(shift: ShiftSystem, f: np.ndarray, horizon: int) -> list:
    s = shift.state_count
    succ = [np.flatnonzero(shift.adjacency[i]) for i in range(s)]
    vectors = set()
    for a in range(s):
        layer = {(a, (0,) * f.shape[1])}
        for k in range(1, horizon + 1):
            new = set()
            for i, m in layer:
                m2 = tuple(int(x) for x in np.add(m, f[i]))
                for j in succ[i]:
                    new.add((int(j), m2))
            layer = new
            for j, m in layer:
                if j == a:
                    vectors.add((k,) + m)
    return sorted(vectors)


def _cycle_lattice_generators(shift: ShiftSystem, f: np.ndarray) -> list:
    """Generators of the lattice spanned by ``(n, f^n)`` over all closed walks.

    With BFS potentials ``h`` from state 0, every edge ``u -> v`` contributes
    ``h(u) + (1, f(u)) - h(v)``; each of these is a difference of two closed
    walks of length below ``2S``, and every closed walk sums to them.
    """
    from scipy.sparse import csgraph

    s = shift.state_count
    graph = csgraph.csgraph_from_dense(shift.adjacency.astype(np.int8))
    order, pred = csgraph.breadth_first_order(graph, 0, directed=True, return_predecessors=True)
    step = np.hstack([np.ones((s, 1), dtype=np.int64), f.astype(np.int64)])
    h = np.zeros((s, step.shape[1]), dtype=np.int64)
    for v in order[1:]:
        h[v] = h[pred[v]] + step[pred[v]]
    u, v = np.nonzero(shift.adjacency)
    defects = h[u] + step[u] - h[v]
    return [tuple(int(x) for x in row) for row in np.unique(defects, axis=0)]


def check_extension_mixing(
    sys: SkewSystem, horizon: int | None = None, on_failure: str = FAILED, ball_horizon: int = 8
) -> MixingCertificate:
    """Certificate for topological mixing of the extension.

    The lattice in ``Z^(d+1)`` spanned by ``(n, f^n(x))`` over periodic points
    of period ``n <= horizon`` must be all of ``Z^(d+1)`` (necessary for every
    group, and the certificate itself for ``Z^d``).  Closed walks of length
    below ``2S`` already generate the full cycle lattice, so for
    ``horizon >= 2S`` it is computed exactly from a spanning tree and a proper
    sublattice proves non-mixing.  Non-abelian and finite groups additionally get a
    reachability check on ``(state, element)`` pairs up to ``ball_horizon``.
    """
    s = sys.shift.state_count
    if not sys.shift.mixing:
        return MixingCertificate(FAILED, 0, detail="base shift is not mixing")
    horizon = 2 * s if horizon is None else horizon
    f = sys.f
    if horizon >= 2 * s:
        vectors = _cycle_lattice_generators(sys.shift, f)
    else:
        vectors = _closed_walk_vectors(sys.shift, f, horizon)
    basis = _hermite_basis(vectors)
    dim = f.shape[1] + 1
    idx = lattice_index(basis, dim)
    cert_basis = [list(r) for r in basis]
    if idx != 1:
        conclusive = horizon >= 2 * s
        status = FAILED if conclusive else on_failure
        detail = (
            "cycle lattice is a proper sublattice of Z^%d (index %s)" % (dim, "inf" if math.isinf(idx) else int(idx))
        )
        return MixingCertificate(status, horizon, cert_basis, idx, "lattice", detail)
    if isinstance(sys.group, Zd):
        return MixingCertificate(VERIFIED, horizon, cert_basis, idx, "lattice", "cycle lattice is Z^%d" % dim)
    ok, detail = _reachability_check(sys, ball_horizon)
    return MixingCertificate(
        VERIFIED if ok else on_failure, ball_horizon, cert_basis, idx, "lattice+reachability", detail
    )


def _reachability_check(sys: SkewSystem, horizon: int) -> tuple[bool, str]:
    # heuristic: every (state, h) with |h| <= horizon/2 reached from every (a, e)
    # at the last two time steps
    group = sys.group
    s = sys.shift.state_count
    succ = [np.flatnonzero(sys.shift.adjacency[i]) for i in range(s)]
    radius = horizon // 2
    targets = {h for h in _ball_values(group, radius)}
    for a in range(s):
        layer = {(a, group.identity)}
        history = []
        for k in range(1, horizon + 1):
            new = set()
            for i, u in layer:
                x = group.mul(u, sys.cocycle.values[i])
                for j in succ[i]:
                    new.add((int(j), x))
            layer = new
            if k >= horizon - 1:
                history.append(layer)
        for seen in history:
            for b in range(s):
                for h in targets:
                    if (b, h) not in seen:
                        return False, f"({b + 1}, {group.format(h)}) not reached from ({a + 1}, e) at all late times"
    return True, f"all pairs within radius {radius} reached at times {horizon - 1} and {horizon}"


def _ball_values(group: Group, radius: int):
    from .groups import ball

    return ball(group, radius)


# --- local limit ---------------------------------------------------------------------


def local_limit_ratio(sys: SkewSystem, xi, n: int, pressure_at_xi: float | None = None) -> float:
    """``Z_n(0) n^(d/2) exp(-n p(xi))``; tends to a positive constant.

    For a ``Z^d`` cocycle whose cycle lattice has index ``k`` in ``Z^(d+1)``,
    ``Z_n(0)`` vanishes off a sublattice of lengths and the constant carries a
    factor ``k`` relative to the aperiodic Gaussian constant.
    """
    d = sys.d
    xi = np.zeros(d) if xi is None else np.asarray(xi, dtype=float).reshape(d)
    if pressure_at_xi is None:
        pressure_at_xi = pressure(sys.shift, sys.potential, xi, sys.f)
    if d == 0:
        m = build_operator(sys.shift, sys.potential).matrix
        from .transfer import trace_powers

        ls, z = trace_powers(m, n)[-1]
        return math.exp(ls + math.log(float(np.real(z))) - n * pressure_at_xi)
    lz = fourier_log_sums(sys, n, None, None, xi)[-1]
    if lz == -math.inf:
        return 0.0
    return math.exp(lz + 0.5 * d * math.log(n) - n * pressure_at_xi)


# --- extension pressure ------------------------------------------------------------------


def growth_fit(n: np.ndarray, log_z: np.ndarray) -> tuple[float, float, float, float]:
    """Least-squares fit ``log Z_n = alpha + P n - kappa log n``.

    Returns ``(P, kappa, alpha, r2)``; the ``log n`` term absorbs the
    polynomial prefactor of constrained counts.
    """
    n = np.asarray(n, dtype=float)
    y = np.asarray(log_z, dtype=float)
    a = np.column_stack([np.ones_like(n), n, -np.log(n)])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return float(coef[1]), float(coef[2]), float(coef[0]), r2


def linear_slope(n: np.ndarray, log_z: np.ndarray) -> float:
    return float(np.polyfit(np.asarray(n, dtype=float), np.asarray(log_z, dtype=float), 1)[0])


@dataclass
class ExtensionPressure:
    """Finite-``n`` evidence for the Gurevich pressure of the extension.

    ``estimate`` is the growth rate from :func:`growth_fit` on the upper half
    of the computed range; ``estimate_bracket`` is the spread of that fit over
    the upper half, third and quarter.  ``certified_lower`` is
    ``max_{n,a} log(Z_n^a)/n`` (valid by supermultiplicativity of closed loops at
    ``a``); ``certified_upper`` is the abelianized pressure ``min_w p(w)``.
    """

    rows: list
    method: str
    last_value: float
    estimate: float
    estimate_bracket: tuple
    kappa: float
    fit_window: tuple
    linear_slope: float
    certified_lower: float | None
    certified_lower_sequence: list
    certified_upper: float
    upper_note: str

    @property
    def bracket_width(self) -> float:
        return self.estimate_bracket[1] - self.estimate_bracket[0]

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "last_value": self.last_value,
            "estimate": self.estimate,
            "estimate_bracket": list(self.estimate_bracket),
            "bracket_width": self.bracket_width,
            "polynomial_exponent": self.kappa,
            "fit_window": list(self.fit_window),
            "linear_slope": self.linear_slope,
            "certified_lower": self.certified_lower,
            "certified_upper": self.certified_upper,
            "upper_note": self.upper_note,
        }


def abelianized_upper(sys: SkewSystem) -> tuple[float, str]:
    """``min_w P(phi + <w, f>)``: an upper bound for both extension pressures."""
    from .xi import ConvergenceError, PressureFunction, find_xi

    base = pressure(sys.shift, sys.potential)
    if sys.d == 0:
        return base, "pressure of the base (d = 0)"
    try:
        res = find_xi(PressureFunction(sys.shift, sys.potential, sys.f))
        return res.pressure_at_xi, "abelianized pressure p(xi)"
    except ConvergenceError:
        return base, "pressure of the base (no interior minimiser)"


def _method_for(sys: SkewSystem, mode: Mode) -> str:
    target = _target(sys.group, mode.target)
    if isinstance(mode, PeriodicAll) and target == sys.group.identity and radial_preconditions(sys) is None:
        return "radial"
    if isinstance(sys.group, Zd) and isinstance(mode, (PeriodicAll, PeriodicCylinder)):
        return "fourier"
    return "dp"


def extension_log_sums(sys: SkewSystem, n_max: int, mode: Mode | None = None, method: str = "auto", budget=DEFAULT_BUDGET):
    """``(log Z_n, log Z_n^a per state or None, method, ball sizes)`` for ``n = 1..n_max``."""
    mode = mode or PeriodicAll()
    if method == "auto":
        method = _method_for(sys, mode)
    s = sys.shift.state_count
    if method == "radial":
        lz = radial_log_sums(sys, n_max)
        cyl = np.repeat((lz - math.log(s))[:, None], s, axis=1)
        return lz, cyl, method, np.zeros(n_max, dtype=int)
    if method == "fourier":
        from .errors import ConvergenceError
        from .xi import PressureFunction, find_xi

        m = np.asarray(_target(sys.group, mode.target))
        try:
            w = find_xi(PressureFunction(sys.shift, sys.potential, sys.f)).xi
        except ConvergenceError:
            w = None
        diag = fourier_log_diagonals(sys, n_max, m, w=w, budget=budget)
        if isinstance(mode, PeriodicCylinder):
            return diag[:, mode.a], diag[:, [mode.a]], method, np.zeros(n_max, dtype=int)
        return _logsumexp_rows(diag), diag, method, np.zeros(n_max, dtype=int)
    table = constrained_table(sys, n_max, mode, budget=budget)
    return table.log_z, table.log_cylinder, "dp", table.ball_size


def extension_pressure(
    sys: SkewSystem,
    n_max: int,
    mode: Mode | None = None,
    method: str = "auto",
    n_min: int | None = None,
    budget: Budget = DEFAULT_BUDGET,
) -> ExtensionPressure:
    """Growth-rate evidence for ``(1/n) log Z_n`` up to ``n_max``.

    Rows cover ``n = 1..n_max``; the fit uses positive rows with
    ``n >= n_min`` (default ``n_max // 2``).  Never claims convergence: the
    certified interval is ``[certified_lower, certified_upper]``.
    """
    mode = mode or PeriodicAll()
    lz, cyl, used, sizes = extension_log_sums(sys, n_max, mode, method, budget)
    n = np.arange(1, n_max + 1)
    rows = []
    for k, z, b in zip(n, lz, sizes):
        rows.append((int(k), math.exp(z) if z < 700 else math.inf, z / k, used, int(b)))
    n_min = n_max // 2 if n_min is None else n_min
    pos = np.isfinite(lz) & (n >= n_min)
    if pos.sum() < 4:
        raise ValidationError(f"need at least 4 nonzero sums with n >= {n_min}; got {int(pos.sum())}")
    est, kappa, _, _ = growth_fit(n[pos], lz[pos])
    spread = [est]
    for frac in (3, 4):
        sub = pos & (n >= n_max - (n_max - n_min) * 2 // frac)
        if sub.sum() >= 4:
            spread.append(growth_fit(n[sub], lz[sub])[0])
    slope = linear_slope(n[pos], lz[pos])
    finite = np.flatnonzero(np.isfinite(lz))
    last_value = float(lz[finite[-1]] / n[finite[-1]])
    target = _target(sys.group, mode.target)
    lower, lower_seq = None, []
    if cyl is not None and target == sys.group.identity:
        best = -math.inf
        for k in range(n_max):
            row = cyl[k]
            fin = row[np.isfinite(row)]
            if fin.size:
                best = max(best, float(fin.max()) / (k + 1))
            lower_seq.append(best)
        lower = best
    upper, note = abelianized_upper(sys)
    return ExtensionPressure(
        rows=rows,
        method=used,
        last_value=last_value,
        estimate=est,
        estimate_bracket=(min(spread), max(spread)),
        kappa=kappa,
        fit_window=(int(n[pos][0]), int(n[pos][-1])),
        linear_slope=slope,
        certified_lower=lower,
        certified_lower_sequence=lower_seq,
        certified_upper=upper,
        upper_note=note,
    )


def amenability_gap(sys: SkewSystem, n_max: int, n_max_abelian: int | None = None, budget=DEFAULT_BUDGET) -> dict:
    """Extension-pressure estimates for ``G`` and for its abelianization on the same base."""
    g_est = extension_pressure(sys, n_max, budget=budget)
    ab = sys.abelianized()
    a_est = extension_pressure(ab, n_max_abelian or n_max, budget=budget)
    gap = a_est.estimate - g_est.estimate
    width = g_est.bracket_width + a_est.bracket_width
    return {
        "group": str(sys.group),
        "abelianization": str(ab.group),
        "G": g_est.as_dict(),
        "G_bar": a_est.as_dict(),
        "gap": gap,
        "abs_gap": abs(gap),
        "bracket_width": width,
        "gap_exceeds_bracket": bool(gap > width),
        "base_pressure": pressure(sys.shift, sys.potential),
    }


# --- l2 growth and the eta series ---------------------------------------------------------


def l2_norm_growth(sys: SkewSystem, n_max: int, a: int = 0, budget: Budget = DEFAULT_BUDGET) -> list:
    """``[(n, log ||L^n v0|| / n)]`` with ``v0`` the indicator of ``[a] x {e}``.

    The norm is the l2 norm over group elements of the sup norm over the base;
    for depth-2 potentials the sup over ``x`` is a max over the first symbol.
    """
    mode = PreimageCylinder(a, BasePoint((), (a,)))
    out = []
    for layer in dp_layers(sys, n_max, mode, prune=False, budget=budget):
        sup = layer.values[:, 0, 0, :].max(axis=1)
        nrm = float(np.sqrt(np.sum(sup**2)))
        out.append((layer.step, (math.log(nrm) + layer.log_scale) / layer.step))
    return out


@dataclass
class EtaDiagnostic:
    value: float
    remainder_bound: float
    ratio_to_identity: float
    terms: list
    observed_ratio: float
    warning: str = ""

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "remainder_bound": self.remainder_bound,
            "ratio_to_identity": self.ratio_to_identity,
            "observed_ratio": self.observed_ratio,
            "warning": self.warning,
        }


def _series(terms: np.ndarray):
    nz = np.flatnonzero(terms > 0)
    if nz.size < 2:
        return float(terms.sum()), 0.0, 0.0
    k1, k2 = nz[-2], nz[-1]
    q = (terms[k2] / terms[k1]) ** (1.0 / (k2 - k1))
    rem = terms[k2] * q / (1 - q) if q < 1 else math.inf
    return float(terms.sum()), float(rem), float(q)


def eta_series_diagnostic(
    sys: SkewSystem,
    o: BasePoint,
    g,
    t: float,
    n_terms: int,
    a: int | None = None,
    rho_est: float | None = None,
    budget: Budget = DEFAULT_BUDGET,
) -> EtaDiagnostic:
    """Truncated ``sum_{n<=N} t^-n (L^n 1_{[a] x {e}})(o, g)`` with a geometric tail estimate.

    Also returns the ratio of the same series at ``g`` and at the identity.
    """
    from .errors import ConvergenceError

    if rho_est is not None and t <= math.exp(rho_est):
        raise ConvergenceError(f"t={t} is not above exp(rho_est)={math.exp(rho_est):.6g}; series diverges")
    group = sys.group
    g = _target(group, g)
    a = o.first if a is None else a
    mode = PreimageCylinder(a, o)
    terms_g, terms_e = np.zeros(n_terms), np.zeros(n_terms)
    o1 = o.first
    for layer in dp_layers(sys, n_terms, mode, targets=[g, group.identity], budget=budget):
        for target, terms in ((g, terms_g), (group.identity, terms_e)):
            rows = layer.rows_for(target)
            if rows.any():
                v = float(layer.values[rows, 0, 0, o1].sum())
                if v > 0:
                    terms[layer.step - 1] = math.exp(math.log(v) + layer.log_scale - layer.step * math.log(t))
    value, rem, q = _series(terms_g)
    if q >= 1:
        raise ConvergenceError(f"series visibly diverging: observed term ratio {q:.6g} >= 1", achieved=q)
    e_value = float(terms_e.sum())
    warning = ""
    if value == 0:
        warning = f"{group.format(g)} not reached from e within {n_terms} steps"
    return EtaDiagnostic(
        value=value,
        remainder_bound=rem,
        ratio_to_identity=value / e_value if e_value > 0 else math.nan,
        terms=terms_g.tolist(),
        observed_ratio=q,
        warning=warning,
    )


__all__ = [
    "BasePoint",
    "Budget",
    "ConstrainedSumTable",
    "ExtensionPressure",
    "Layer",
    "MixingCertificate",
    "PeriodicAll",
    "PeriodicCylinder",
    "Preimage",
    "PreimageCylinder",
    "SkewSystem",
    "amenability_gap",
    "check_extension_mixing",
    "constrained_sum",
    "constrained_table",
    "dp_layers",
    "eta_series_diagnostic",
    "extension_pressure",
    "fourier_constrained_sum",
    "fourier_log_diagonals",
    "fourier_log_sums",
    "free_group_radial_sum",
    "growth_fit",
    "l2_norm_growth",
    "local_limit_ratio",
    "radial_log_sums",
]

