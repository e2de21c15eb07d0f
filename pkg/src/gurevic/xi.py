"""The pressure function w -> P(phi + <w, f>), its gradient, and its minimiser xi."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError
from .shift import Potential, ShiftSystem
from .transfer import GibbsMeasure, gibbs_measure, perron

DEFAULT_XI_TOL = 1e-10
FD_STEP = 1e-4
FLAT_RATIO = 1e-8


class FlatDirectionError(ConvergenceError):
    """The pressure function has (numerically) zero curvature along ``direction``."""

    def __init__(self, message, direction):
        self.direction = np.asarray(direction)
        super().__init__(message)


class PressureFunction:
    """``w -> log lambda(M_w)`` for a fixed shift, potential and ``S x d`` array ``f``.

    Evaluations are cached by ``w``.  ``delta`` is the radius of the domain on
    which the pressure is finite (infinite for finite shifts).
    """

    def __init__(self, shift: ShiftSystem, potential: Potential, f, delta: float = math.inf):
        self.shift = shift
        self.potential = potential
        f = np.asarray(f, dtype=float) if f is not None else np.zeros((shift.state_count, 0))
        self.f = f.reshape(shift.state_count, -1)
        self.delta = delta
        self._base = np.where(shift.adjacency, np.exp(potential.values), 0.0)
        self._cache: dict[tuple, tuple[float, np.ndarray]] = {}

    @property
    def d(self) -> int:
        return self.f.shape[1]

    def gibbs(self, w) -> GibbsMeasure:
        w = np.atleast_1d(np.asarray(w, dtype=float)).reshape(self.d)
        return gibbs_measure(self.shift, self.potential, self.f, w)

    def _eval(self, w) -> tuple[float, np.ndarray]:
        # only (pressure, stationary vector) is cached: kernels are S x S
        w = np.atleast_1d(np.asarray(w, dtype=float)).reshape(self.d)
        key = tuple(w.tolist())
        hit = self._cache.get(key)
        if hit is None:
            pd = perron(self._base * np.exp(self.f @ w)[:, None], irreducible=self.shift.transitive)
            p = pd.left * pd.right
            hit = self._cache.setdefault(key, (pd.pressure, p / p.sum()))
        return hit

    def __call__(self, w) -> float:
        return self._eval(w)[0]

    def grad(self, w) -> np.ndarray:
        """Exact gradient: the Gibbs mean of ``f`` at tilt ``w``."""
        if self.d == 0:
            return np.zeros(0)
        return self._eval(w)[1] @ self.f

    def hessian(self, w, step: float = FD_STEP) -> np.ndarray:
        """Central differences of the exact gradient, Richardson-extrapolated."""
        w = np.atleast_1d(np.asarray(w, dtype=float))
        d = self.d
        h = np.zeros((d, d))
        for k in range(d):
            e = np.zeros(d)
            e[k] = 1.0

            def diff(s):
                return (self.grad(w + s * e) - self.grad(w - s * e)) / (2 * s)

            h[:, k] = (4 * diff(step / 2) - diff(step)) / 3
        return 0.5 * (h + h.T)


def p_eval(pf: PressureFunction, w) -> float:
    return pf(w)


def p_grad(pf: PressureFunction, w) -> np.ndarray:
    return pf.grad(w)


@dataclass
class XiResult:
    xi: np.ndarray
    gradient_norm: float
    pressure_at_xi: float
    hessian_spectrum: np.ndarray
    iterations: int = 0
    starts: list = field(default_factory=list)
    assumption_report: "AssumptionReport | None" = None

    def as_dict(self) -> dict:
        out = {
            "xi": [float(x) for x in self.xi],
            "gradient_norm": float(self.gradient_norm),
            "pressure_at_xi": float(self.pressure_at_xi),
            "hessian_spectrum": [float(x) for x in self.hessian_spectrum],
            "iterations": int(self.iterations),
        }
        if self.assumption_report is not None:
            out["assumption_report"] = self.assumption_report.as_dict()
        return out


def _newton(pf: PressureFunction, w0: np.ndarray, tol: float, max_iter: int):
    w = np.array(w0, dtype=float)
    g = pf.grad(w)
    p = pf(w)
    for it in range(max_iter):
        gn = np.linalg.norm(g)
        if gn <= tol:
            return w, g, it
        h = pf.hessian(w)
        evals, evecs = np.linalg.eigh(h)
        if evals[-1] <= 0 or evals[0] < FLAT_RATIO * max(1.0, evals[-1]):
            k = 0 if evals[-1] > 0 else int(np.argmin(evals))
            v = evecs[:, k]
            if abs(v @ g) > 0.5 * gn or evals[-1] <= 0:
                raise FlatDirectionError(
                    f"pressure function is flat along {np.round(v, 6).tolist()} (curvature {evals[k]:.3g})", v
                )
            # step only within the curved directions; find_xi rejects the flat ones
            keep = evals >= FLAT_RATIO * max(1.0, evals[-1])
            step = -(evecs[:, keep] @ ((evecs[:, keep].T @ g) / evals[keep]))
            if not keep.any() or np.linalg.norm(evecs[:, keep].T @ g) <= tol:
                return w, g, it
        else:
            step = -np.linalg.solve(h, g)
        slope = g @ step
        alpha = 1.0
        while True:
            w_new = w + alpha * step
            p_new = pf(w_new)
            if p_new <= p + 1e-4 * alpha * slope:
                break
            g_try = pf.grad(w_new)
            # near the minimum pressure differences drown in rounding; fall back
            # on gradient decrease
            if alpha == 1.0 and np.linalg.norm(g_try) < 0.5 * gn and gn < 1e-5:
                break
            alpha *= 0.5
            if alpha < 1e-14:
                raise ConvergenceError(f"line search stalled at |grad|={gn:.3g}", achieved=gn)
        w, p = w_new, p_new
        g = pf.grad(w)
    gn = np.linalg.norm(g)
    if gn <= tol:
        return w, g, max_iter
    raise ConvergenceError(f"Newton iteration cap {max_iter} reached at |grad|={gn:.3g}", achieved=gn)


def find_xi(
    pf: PressureFunction,
    init=None,
    tol: float = DEFAULT_XI_TOL,
    max_iter: int = 100,
    starts: int = 3,
    seed: int = 0,
) -> XiResult:
    """Minimise the pressure function by safeguarded Newton from several starts.

    The default starts are ``init`` (zero if omitted) and ``starts - 1`` seeded
    Gaussian perturbations of it; the minimisers must agree.
    """
    d = pf.d
    if d == 0:
        return XiResult(np.zeros(0), 0.0, pf(np.zeros(0)), np.zeros(0))
    w0 = np.zeros(d) if init is None else np.asarray(init, dtype=float).reshape(d)
    rng = np.random.default_rng(seed)
    inits = [w0] + [w0 + rng.normal(size=d) for _ in range(starts - 1)]
    found = []
    total_it = 0
    for x0 in inits:
        w, g, it = _newton(pf, x0, tol, max_iter)
        found.append(w)
        total_it += it
    xi = found[0]
    spectrum = np.linalg.eigvalsh(pf.hessian(xi))
    if spectrum[-1] <= 0 or spectrum[0] < FLAT_RATIO * max(1.0, spectrum[-1]):
        v = np.linalg.eigh(pf.hessian(xi))[1][:, 0]
        raise FlatDirectionError("minimiser is not strict: flat direction at xi", v)
    agree = 10 * tol / min(1.0, spectrum[0])
    for w in found[1:]:
        if np.linalg.norm(w - xi) > agree:
            raise ConvergenceError(
                f"minimisers from different starts disagree by {np.linalg.norm(w - xi):.3g}",
                achieved=float(np.linalg.norm(w - xi)),
            )
    return XiResult(
        xi=xi,
        gradient_norm=float(np.linalg.norm(pf.grad(xi))),
        pressure_at_xi=pf(xi),
        hessian_spectrum=spectrum,
        iterations=total_it,
        starts=[w.copy() for w in found],
    )


# --- assumption checks -------------------------------------------------------------

VERIFIED, ASSUMED, FAILED = "verified", "assumed", "failed"


@dataclass
class AssumptionReport:
    mixing: str
    mixing_evidence: dict
    summability: str
    delta: float
    minimum: str
    minimum_evidence: dict

    def as_dict(self) -> dict:
        return {
            "I_extension_mixing": {"status": self.mixing, **self.mixing_evidence},
            "II_delta_positive": {"status": self.summability, "delta": self.delta},
            "III_unique_interior_minimum": {"status": self.minimum, **self.minimum_evidence},
        }


def check_assumptions(sys, delta: float = math.inf, horizon: int | None = None, tol: float = DEFAULT_XI_TOL):
    """Report on the three standing assumptions for a skew system.

    (I) extension mixing, via :func:`gurevic.skewprod.check_extension_mixing`;
    (II) ``delta > 0`` (``inf`` for finite shifts, or a closed form supplied by a
    truncation family); (III) unique interior minimum with positive curvature.
    """
    from .skewprod import check_extension_mixing

    cert = check_extension_mixing(sys, horizon=horizon)
    summability = VERIFIED if delta > 0 else FAILED
    pf = PressureFunction(sys.shift, sys.potential, sys.f, delta)
    evidence: dict = {}
    try:
        res = find_xi(pf, tol=tol)
        interior = bool(np.linalg.norm(res.xi) < delta)
        positive = bool(pf.d == 0 or res.hessian_spectrum[0] > 0)
        minimum = VERIFIED if interior and positive else FAILED
        evidence = {
            "xi": [float(x) for x in res.xi],
            "pressure_at_xi": res.pressure_at_xi,
            "hessian_spectrum": [float(x) for x in res.hessian_spectrum],
            "interior": interior,
        }
    except FlatDirectionError as exc:
        minimum = FAILED
        evidence = {"flat_direction": [float(x) for x in exc.direction], "message": str(exc)}
    except ConvergenceError as exc:
        minimum = FAILED
        evidence = {"message": str(exc)}
    return AssumptionReport(cert.status, cert.as_dict(), summability, delta, minimum, evidence)
