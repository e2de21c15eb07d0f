"""Transfer matrices, Perron data, pressure and Gibbs measures.

For a depth-2 potential ``phi`` and abelianized cocycle ``f`` (an ``S x d``
integer array) the twisted transfer matrix is

    M(i, j) = A(i, j) * exp(phi(i, j) + <w, f(i)> + 2*pi*1j*<t, f(i)>)

acting on functions of the first symbol by ``(L v)(j) = sum_i M(i, j) v(i)``.
With this convention ``trace(M**n)`` is exactly the weighted sum over points of
period ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import ConvergenceError, ValidationError
from .shift import DEFAULT_ORACLE_CEILING, Potential, ShiftSystem, Word, birkhoff_sum, enumerate_words

DENSE_LIMIT = 64
DEFAULT_TOL = 1e-12
SPARSE_DENSITY = 0.1  # above this fill fraction power iteration stays dense


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    matrix: np.ndarray
    w: np.ndarray
    t: np.ndarray

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.matrix)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class PerronData:
    """Leading eigenvalue with right/left eigenvectors.

    Normalised so that ``max(right) == 1`` and ``left @ right == 1``.
    ``residual`` is the larger of the relative right and left eigen-residuals.
    """

    lam: float
    right: np.ndarray
    left: np.ndarray
    residual: float
    method: str
    second_modulus: float | None = None

    @property
    def pressure(self) -> float:
        return math.log(self.lam)


def _as_f(f, s: int) -> np.ndarray:
    if f is None:
        return np.zeros((s, 0), dtype=np.int64)
    f = np.asarray(f)
    if f.ndim == 1:
        f = f[:, None]
    if f.shape[0] != s:
        raise ValidationError(f"cocycle has {f.shape[0]} rows for {s} states")
    return f


def build_operator(
    shift: ShiftSystem,
    potential: Potential,
    f=None,
    w: Sequence[float] | None = None,
    t: Sequence[float] | None = None,
) -> TransferMatrix:
    """Assemble the (possibly twisted) transfer matrix.

    ``f`` is an ``S x d`` integer array (``d = 0`` allowed); ``w`` and ``t``
    default to zero vectors of length ``d``.
    """
    s = shift.state_count
    if potential.state_count != s:
        raise ValidationError("potential and shift have different state counts")
    f = _as_f(f, s)
    d = f.shape[1]
    w = np.zeros(d) if w is None else np.atleast_1d(np.asarray(w, dtype=float))
    t = np.zeros(d) if t is None else np.atleast_1d(np.asarray(t, dtype=float))
    if w.shape != (d,) or t.shape != (d,):
        raise ValidationError(f"twist parameters must have dimension {d}, got w={w.shape}, t={t.shape}")
    logw = potential.values + (f @ w)[:, None]
    mask = shift.adjacency
    if np.any(t != 0):
        phase = np.exp(2j * math.pi * (f @ t))[:, None]
        m = np.where(mask, np.exp(logw) * phase, 0)
    else:
        m = np.where(mask, np.exp(logw), 0.0)
    return TransferMatrix(m, w, t)


def _matrix(m) -> np.ndarray:
    return m.matrix if isinstance(m, TransferMatrix) else np.asarray(m)


def _is_irreducible(m: np.ndarray) -> bool:
    from scipy.sparse import csgraph

    n, _ = csgraph.connected_components((m != 0).astype(np.int8), directed=True, connection="strong")
    return n == 1


def _normalise(lam, r, l, m):
    r = np.abs(r)
    l = np.abs(l)
    r = r / r.max()
    l = l / (l @ r)
    # Rayleigh quotient: exact for exactly representable eigenpairs
    lam = float(l @ (m @ r)) / float(l @ r)
    res_r = np.max(np.abs(m @ r - lam * r)) / lam
    res_l = np.max(np.abs(l @ m - lam * l)) / (lam * np.max(l))
    return lam, r, l, float(max(res_r, res_l))


def _perron_dense(m: np.ndarray):
    vals, vl, vr = scipy.linalg.eig(m, left=True, right=True)
    k = int(np.argmax(vals.real))
    lam = vals[k].real
    r = vr[:, k].real
    l = vl[:, k].real
    mods = np.sort(np.abs(vals))[::-1]
    second = float(mods[1]) if len(mods) > 1 else 0.0
    lam, r, l, res = _normalise(lam, r, l, m)
    return lam, r, l, res, second


def _power_vector(op, n, tol, max_iter, shift):
    # power iteration x <- (M + shift I) x, stopped on the Collatz-Wielandt
    # bracket of M itself; shift = 1 makes periodic matrices primitive
    x = np.ones(n)
    lo = hi = 0.0
    for _ in range(max_iter):
        y = op(x)
        ratio = y / x
        lo, hi = ratio.min(), ratio.max()
        if hi - lo <= tol * hi:
            return 0.5 * (lo + hi), x
        x = y + shift * x
        x = x / x.max()
        x = np.maximum(x, 1e-300)
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps", achieved=(hi - lo) / hi if hi else None
    )


def _perron_power(m: np.ndarray, tol: float, max_iter: int):
    n = m.shape[0]
    # a self-loop makes an irreducible matrix primitive: no shift needed
    shift = 0.0 if np.any(np.diagonal(m) > 0) else 1.0
    rows = m[:: max(1, n // 64)]  # fill fraction estimated on a row sample
    if np.count_nonzero(rows) > SPARSE_DENSITY * rows.size:
        op = m
        _, r = _power_vector(lambda x: m @ x, n, tol, max_iter, shift)
        _, l = _power_vector(lambda x: x @ m, n, tol, max_iter, shift)
    else:
        op = scipy.sparse.csr_matrix(m)
        opt = op.T.tocsr()
        _, r = _power_vector(lambda x: op @ x, n, tol, max_iter, shift)
        _, l = _power_vector(lambda x: opt @ x, n, tol, max_iter, shift)
    lam, r, l, res = _normalise(None, r, l, op)
    return lam, r, l, res, None


def collatz_wielandt(m, r: np.ndarray) -> tuple[float, float]:
    """``min_i (M r)_i / r_i <= lambda <= max_i (M r)_i / r_i`` for positive ``r``."""
    ratio = (_matrix(m) @ r) / r
    return float(ratio.min()), float(ratio.max())


def perron(
    m,
    tol: float = DEFAULT_TOL,
    method: str = "auto",
    max_iter: int = 100_000,
    irreducible: bool | None = None,
) -> PerronData:
    """Perron root and eigenvectors of a real nonnegative irreducible matrix.

    ``method`` is ``"dense"`` (full eigensolve, also reports the second largest
    eigenvalue modulus), ``"power"`` or ``"auto"`` (dense up to 64 states).
    ``irreducible`` may carry a known answer (e.g. the shift's transitivity
    flag) to skip the graph check.
    """
    m = _matrix(m)
    if np.iscomplexobj(m):
        raise ValidationError("perron needs a real (untwisted) matrix")
    if m.min() < 0:
        raise ValidationError("perron needs a nonnegative matrix")
    if irreducible is None:
        irreducible = _is_irreducible(m)
    if not irreducible:
        raise ValidationError("matrix is reducible; the shift must be transitive")
    if method == "auto":
        method = "dense" if m.shape[0] <= DENSE_LIMIT else "power"
    if method == "dense":
        lam, r, l, res, second = _perron_dense(m)
    elif method == "power":
        lam, r, l, res, second = _perron_power(m, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    if res > tol:
        raise ConvergenceError(f"Perron residual {res:.3g} above tolerance {tol:.3g}", achieved=res)
    if not (np.all(r > 0) and np.all(l > 0)):
        raise ConvergenceError("Perron eigenvectors are not strictly positive", achieved=res)
    return PerronData(lam, r, l, res, method, second)


def pressure(shift: ShiftSystem, potential: Potential, w=None, f=None, **kw) -> float:
    """``log`` of the leading eigenvalue of the ``w``-tilted real matrix."""
    return shift_perron(shift, potential, f, w, **kw).pressure


def shift_perron(shift: ShiftSystem, potential: Potential, f=None, w=None, **kw) -> PerronData:
    """Perron data of the ``w``-tilted matrix; irreducibility is read off the shift."""
    kw.setdefault("irreducible", shift.transitive)
    return perron(build_operator(shift, potential, f, w), **kw)


def trace_powers(m, n_max: int) -> list[tuple[float, complex]]:
    """``(log_scale, z)`` with ``trace(M**n) = exp(log_scale) * z`` for ``n = 1..n_max``.

    Powers are rescaled by their largest entry at every step.
    """
    m = _matrix(m)
    p = np.identity(m.shape[0], dtype=m.dtype)
    log_scale = 0.0
    out = []
    for _ in range(n_max):
        p = p @ m
        scale = np.abs(p).max()
        if scale == 0:
            out.append((0.0, 0.0))
            continue
        p = p / scale
        log_scale += math.log(scale)
        out.append((log_scale, np.trace(p)))
    return out


def pressure_via_periodic(shift: ShiftSystem, potential: Potential, n_max: int, f=None, w=None):
    """``[(n, log(trace(M**n)) / n)]``; ``-inf`` marks lengths with no periodic points."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    m = build_operator(shift, potential, f, w).matrix
    out = []
    for n, (ls, z) in enumerate(trace_powers(m, n_max), start=1):
        z = float(np.real(z))
        out.append((n, (ls + math.log(z)) / n if z > 0 else -math.inf))
    return out


# --- Gibbs measures -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GibbsMeasure:
    """Markov measure ``p_i P(i, j)`` equal to the Gibbs measure of the potential."""

    stationary: np.ndarray
    kernel: np.ndarray
    perron: PerronData
    shift: ShiftSystem

    @property
    def pressure(self) -> float:
        return self.perron.pressure

    def edge_marginals(self) -> np.ndarray:
        return self.stationary[:, None] * self.kernel

    def integrate(self, table) -> float:
        """Integral of a locally constant function given as an ``S x S`` edge table
        (or a length-``S`` state vector)."""
        table = np.asarray(getattr(table, "values", table), dtype=float)
        if table.ndim == 1:
            return float(self.stationary @ table)
        return float(np.sum(self.edge_marginals() * table))


def gibbs_measure(shift: ShiftSystem, potential: Potential, f=None, w=None, **kw) -> GibbsMeasure:
    m = build_operator(shift, potential, f, w).matrix
    kw.setdefault("irreducible", shift.transitive)
    pd = perron(m, **kw)
    r, l = pd.right, pd.left
    kernel = m * r[None, :] / (pd.lam * r[:, None])
    p = l * r
    p = p / p.sum()
    return GibbsMeasure(p, kernel, pd, shift)


def gibbs_cylinder_mass(g: GibbsMeasure, w: Sequence[int]) -> float:
    """Mass of the cylinder ``[w]``; 0 for forbidden words."""
    w = tuple(w)
    if not g.shift.is_allowed(w):
        return 0.0
    mass = g.stationary[w[0]]
    for t in range(len(w) - 1):
        mass *= g.kernel[w[t], w[t + 1]]
    return float(mass)


def evaluation_successor(shift: ShiftSystem, w: Word) -> int:
    """Symbol following ``w`` in the fixed evaluation point of ``[w]``: the periodic
    extension when the wrap edge exists, else the first step of the shortest
    return path to ``w[0]``."""
    if shift.allowed(w[-1], w[0]):
        return w[0]
    return shift.shortest_path(w[-1], w[0])[1]


def gibbs_bounds_check(
    g: GibbsMeasure,
    shift: ShiftSystem,
    potential: Potential,
    up_to: int,
    ceiling: int = DEFAULT_ORACLE_CEILING,
) -> tuple[float, float]:
    """Empirical Gibbs constants ``min`` / ``max`` of ``mu[w] * exp(n P - phi^n(x_w))``
    over all allowed words of length ``1..up_to``."""
    if up_to > ceiling:
        raise ValueError(f"up_to={up_to} exceeds the enumeration ceiling {ceiling}")
    lam = g.perron.lam
    lo, hi = math.inf, -math.inf
    for n in range(1, up_to + 1):
        lam_n = lam**n
        for w in enumerate_words(shift, n):
            c = evaluation_successor(shift, w)
            sn = birkhoff_sum(shift, potential, w, periodic=False, continuation=c)
            ratio = gibbs_cylinder_mass(g, w) * lam_n * math.exp(-sn)
            lo, hi = min(lo, ratio), max(hi, ratio)
    return lo, hi


def gibbs_envelope(g: GibbsMeasure, shift: ShiftSystem, potential: Potential) -> tuple[float, float]:
    """Bounds on the Gibbs ratio implied by the eigenvectors:
    ``l_i r_j lam exp(-phi(j, k))`` over allowed ``j -> k`` and all ``i``."""
    l, r, lam = g.perron.left, g.perron.right, g.perron.lam
    edge = np.where(shift.adjacency, np.exp(-potential.values), np.nan)
    lo = l.min() * lam * np.nanmin(r[:, None] * edge)
    hi = l.max() * lam * np.nanmax(r[:, None] * edge)
    return float(lo), float(hi)


def twisted_spectral_radius(shift: ShiftSystem, potential: Potential, f, w=None, t=None) -> float:
    """Largest eigenvalue modulus of the complex twisted matrix."""
    m = build_operator(shift, potential, f, w, t).matrix
    if m.shape[0] <= DENSE_LIMIT:
        return float(np.max(np.abs(np.linalg.eigvals(m))))
    # growth rate of ||M^k x||, averaged over a long run
    x = np.ones(m.shape[0], dtype=complex)
    sm = scipy.sparse.csr_matrix(m)
    log_norm = 0.0
    k_total = 2000
    for k in range(k_total):
        x = sm @ x
        nrm = np.linalg.norm(x)
        if nrm == 0:
            return 0.0
        x /= nrm
        if k >= k_total // 2:
            log_norm += math.log(nrm)
    return math.exp(log_norm / (k_total - k_total // 2))
