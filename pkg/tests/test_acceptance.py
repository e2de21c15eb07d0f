"""Acceptance criteria 1-11.

Each test records one ``criterion N: PASS|FAIL`` line with the measured
numbers, then asserts; the lines are printed together after the module runs.
Tolerances and runtime limits are the stated ones; nothing is relaxed to make
a criterion pass.
"""

import math
import time

import numpy as np
import pytest

from gurevic.bip import TruncationFamily, convergence_report
from gurevic.equidist import TestFunction, empirical_integral, empirical_sequence, equidist_report, ld_tail, ld_tail_brute
from gurevic.oracle import brute_constrained_sum, default_modes
from gurevic.shift import Potential, ShiftSystem
from gurevic.skewprod import (
    PeriodicAll,
    amenability_gap,
    check_extension_mixing,
    constrained_table,
    extension_pressure,
    fourier_log_sums,
    local_limit_ratio,
)
from gurevic.transfer import (
    build_operator,
    gibbs_bounds_check,
    gibbs_envelope,
    gibbs_measure,
    pressure,
    trace_powers,
    twisted_spectral_radius,
)
from gurevic.xi import PressureFunction, find_xi

from gurevic.config import load_config

from conftest import DEMO_FILES, demo

LOG4 = math.log(4)
LOG_2_SQRT3 = 1.2424533249
RESULTS = {}


class Criterion:
    def __init__(self, number: int, runtime: float | None = None):
        self.number = number
        self.runtime = runtime
        self.checks = []
        self.t0 = time.perf_counter()

    def check(self, label: str, ok: bool, detail: str = ""):
        self.checks.append((label, bool(ok), detail))

    def done(self):
        if self.runtime is not None:
            dt = time.perf_counter() - self.t0
            self.check(f"runtime < {self.runtime:g} s", dt < self.runtime, f"{dt:.2f} s")
        ok = all(c[1] for c in self.checks)
        failed = [f"{c[0]} ({c[2]})" for c in self.checks if not c[1]]
        passed = "; ".join(f"{c[0]}: {c[2]}" for c in self.checks if c[1] and c[2])
        line = f"criterion {self.number}: {'PASS' if ok else 'FAIL'}"
        line += f"  [{passed}]" if passed else ""
        line += f"  failed: {'; '.join(failed)}" if failed else ""
        RESULTS[self.number] = line
        assert ok, line


def test_criterion_01_pressure_oracle():
    c = Criterion(1, runtime=1.0)
    golden = ShiftSystem(np.array([[1, 1], [1, 0]]))
    exact = math.log((1 + math.sqrt(5)) / 2)
    p = pressure(golden, Potential.zero(2))
    c.check("|P - log phi| <= 1e-9", abs(p - exact) <= 1e-9, f"err {abs(p - exact):.1e}")
    lucas = [1, 3]
    while len(lucas) < 20:
        lucas.append(lucas[-1] + lucas[-2])
    exact_traces = [golden.trace_power(n) for n in range(1, 21)]
    m = build_operator(golden, Potential.zero(2)).matrix
    float_traces = [round(math.exp(ls) * z.real) for ls, z in trace_powers(m, 20)]
    c.check("trace(A^n) = Lucas(n), n <= 20", exact_traces == lucas and float_traces == lucas)
    c.done()


def test_criterion_02_xi_closed_form():
    c = Criterion(2, runtime=1.0)
    cfg = demo("xi_closed_form").skew()
    res = find_xi(PressureFunction(cfg.shift, cfg.potential, cfg.f))
    c.check("xi = -0.5 +- 1e-8", abs(res.xi[0] + 0.5) <= 1e-8, f"xi {res.xi[0]:.12f}")
    target = 0.5 + math.log(2)
    c.check("p(xi) = 0.5 + log 2 +- 1e-10", abs(res.pressure_at_xi - target) <= 1e-10,
            f"err {abs(res.pressure_at_xi - target):.1e}")
    worst = 0.0
    rng = np.random.default_rng(2024)
    h = 1e-5
    for name in ("xi_closed_form", "full3_z", "z2_full4"):
        s = demo(name).skew()
        pf = PressureFunction(s.shift, s.potential, s.f)
        for _ in range(20):
            w = rng.normal(size=s.d)
            g = pf.grad(w)
            fd = np.array([(pf(w + h * e) - pf(w - h * e)) / (2 * h) for e in np.identity(s.d)])
            worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-300))
    c.check("gradient vs FD rel err <= 1e-6", worst <= 1e-6, f"worst {worst:.1e}")
    c.done()


def test_criterion_03_constrained_sum_exactness():
    c = Criterion(3, runtime=60.0)
    worst_dp, worst_fourier = 0.0, 0.0
    for path in DEMO_FILES:
        s = load_config(path).skew()
        brute = [brute_constrained_sum(s, n) for n in range(1, 11)]
        dp = constrained_table(s, 10, PeriodicAll()).log_z
        for b, lz in zip(brute, dp):
            fast = math.exp(lz) if lz > -math.inf else 0.0
            err = abs(fast - b) / b if b else abs(fast)
            worst_dp = max(worst_dp, err)
        if s.group.kind == "zd":
            dp12 = constrained_table(s, 12, PeriodicAll()).log_z
            fo12 = fourier_log_sums(s, 12)
            for a, b in zip(dp12, fo12):
                if a == -math.inf:
                    worst_fourier = max(worst_fourier, 0.0 if b == -math.inf else math.exp(b))
                else:
                    bb = math.exp(b) if b > -math.inf else 0.0
                    worst_fourier = max(worst_fourier, abs(bb - math.exp(a)) / math.exp(a))
    c.check("DP = brute to 1e-10 rel, n <= 10", worst_dp <= 1e-10, f"worst {worst_dp:.1e} over {len(DEMO_FILES)} demos")
    c.check("Fourier = DP to 1e-8 rel, n <= 12", worst_fourier <= 1e-8, f"worst {worst_fourier:.1e}")
    c.done()


def test_criterion_04_local_limit():
    c = Criterion(4, runtime=5.0)
    s = demo("full2_balanced").skew()
    # even-n normalisation: the cycle lattice has index 2, doubling the Gaussian constant
    r = local_limit_ratio(s, None, 200)
    target = math.sqrt(2 / math.pi)
    c.check("Z_200(0) sqrt(200) 2^-200 within 2% of sqrt(2/pi)", abs(r / target - 1) <= 0.02,
            f"{r:.6f} vs {target:.6f}")
    c.done()


def test_criterion_05_non_amenable_gap():
    c = Criterion(5, runtime=10.0)
    s = demo("free2_full4").skew()
    gap = amenability_gap(s, 200)
    g, gb = gap["G"], gap["G_bar"]
    c.check("F2 radial estimate within 0.01 of log(2 sqrt 3)", abs(g["estimate"] - LOG_2_SQRT3) <= 0.01,
            f"{g['estimate']:.5f}")
    c.check("Z^2 estimate within 0.01 of log 4", abs(gb["estimate"] - LOG4) <= 0.01, f"{gb['estimate']:.5f}")
    c.check("gap >= 0.13", gap["gap"] >= 0.13, f"{gap['gap']:.4f}")
    c.check("bracket width <= 0.02", gap["bracket_width"] <= 0.02, f"{gap['bracket_width']:.1e}")
    c.done()


def test_criterion_06_amenable_equality():
    c = Criterion(6, runtime=180.0)
    s = demo("heisenberg_full4").skew()
    ep = extension_pressure(s, 40, n_min=20)
    c.check("fitted slope over [20, 40] within 0.05 of log 4", abs(ep.estimate - LOG4) <= 0.05,
            f"{ep.estimate:.5f}")
    c.check("last value within 0.15 of log 4", abs(ep.last_value - LOG4) <= 0.15,
            f"(1/40) log Z_40 = {ep.last_value:.5f}, off by {abs(ep.last_value - LOG4):.4f}")
    seq = ep.certified_lower_sequence[19:]
    c.check("certified lower bound increasing", all(b >= a for a, b in zip(seq, seq[1:])) and seq[-1] > seq[0],
            f"{seq[0]:.4f} -> {seq[-1]:.4f}")
    c.check("below the amenable upper bound", ep.certified_lower <= ep.certified_upper)
    c.done()


def test_criterion_07_equidistribution():
    c = Criterion(7, runtime=30.0)
    s = demo("full2_balanced").skew()
    g = TestFunction.indicator(2, (0, 0))
    ns = [6, 10, 14, 18, 20]
    seq = empirical_sequence(s, PeriodicAll(), 20, g)
    diffs = [abs(seq[n - 1] - 0.25) for n in ns]
    c.check("|int g dM_20 - 0.25| <= 0.05", diffs[-1] <= 0.05, f"{seq[19]:.6f}")
    c.check("strictly decreasing along n", all(b < a for a, b in zip(diffs, diffs[1:])),
            ", ".join(f"{d:.4f}" for d in diffs))
    brute6 = empirical_integral(s, PeriodicAll(), 6, g, "brute")
    c.check("exact 0.2 at n = 6 by brute force", abs(brute6 - 0.2) <= 1e-14, f"{brute6}")
    rep = equidist_report(s, g, [20], default_modes(s.shift))
    vals = [r.empirical for r in rep.rows]
    spread = max(vals) - min(vals)
    c.check("four modes agree within 0.05 at n = 20", spread <= 0.05 and len(vals) == 4, f"spread {spread:.4f}")
    c.done()


def test_criterion_08_large_deviation_tail():
    c = Criterion(8, runtime=30.0)
    s = demo("full2_balanced").skew()
    g = TestFunction.indicator(2, (0, 0))
    t6 = ld_tail_brute(s, g, 0.2, 6, limit=0.25)
    c.check("tail mass 0.1 at n = 6 by brute force", abs(t6 - 0.1) <= 1e-14, f"{t6}")
    fit = ld_tail(s, g, 0.2, list(range(8, 21)), limit=0.25)
    c.check("eta > 0", fit.eta > 0, f"eta {fit.eta:.4f}")
    c.check("R^2 >= 0.9", fit.r2 >= 0.9, f"R^2 {fit.r2:.5f}")
    c.done()


def test_criterion_09_twisted_radius():
    c = Criterion(9, runtime=1.0)
    s = demo("full3_z").skew()
    cert = check_extension_mixing(s)
    c.check("extension mixing verified", cert.status == "verified")
    res = find_xi(PressureFunction(s.shift, s.potential, s.f))
    bound = math.exp(res.pressure_at_xi) - 1e-6
    grid = [(k + 0.5) / 64 for k in range(64)]
    radii = [twisted_spectral_radius(s.shift, s.potential, s.f, w=res.xi, t=[t]) for t in grid]
    c.check("twisted radius < e^p(xi) - 1e-6 on 64 points", max(radii) < bound,
            f"max {max(radii):.6f} vs {bound + 1e-6:.6f}")
    two = demo("full2_balanced").skew()
    err = max(
        abs(twisted_spectral_radius(two.shift, two.potential, two.f, t=[t]) - 2 * abs(math.cos(2 * math.pi * t)))
        for t in grid
    )
    c.check("full 2-shift radius = 2|cos 2 pi t| to 1e-10", err <= 1e-10, f"err {err:.1e}")
    c.done()


def test_criterion_10_bip_truncation():
    c = Criterion(10, runtime=30.0)
    fam = TruncationFamily("zeta", 2.0)
    limit = math.log(math.pi**2 / 6)
    rows = convergence_report(fam, [64, 128, 256, 512, 1024, 2048, 4096])
    ps = [r.pressure for r in rows]
    c.check("pressure_N increasing", all(b > a for a, b in zip(ps, ps[1:])))
    gap = limit - rows[-1].pressure
    c.check("within 1e-4 of log(pi^2/6) at N = 4096", abs(gap) <= 1e-4, f"gap {gap:.4e}")
    c.check("tail bracket contains the limit at every N", all(r.lower <= limit <= r.upper for r in rows))
    c.check("delta = ln 2 to 1e-12", all(abs(r.delta - math.log(2)) <= 1e-12 for r in rows))
    c.done()


def test_criterion_11_gibbs_property():
    c = Criterion(11)
    cfg = demo("golden_mean_edge")
    g = gibbs_measure(cfg.shift, cfg.potential)
    lo, hi = gibbs_bounds_check(g, cfg.shift, cfg.potential, 8)
    env_lo, env_hi = gibbs_envelope(g, cfg.shift, cfg.potential)
    inside = env_lo * (1 - 1e-12) <= lo and hi <= env_hi * (1 + 1e-12)
    c.check("golden mean A, B inside the envelope", inside,
            f"A {lo:.6f} >= {env_lo:.6f}, B {hi:.6f} <= {env_hi:.6f}")
    full2 = ShiftSystem.full(2)
    a, b = gibbs_bounds_check(gibbs_measure(full2, Potential.zero(2)), full2, Potential.zero(2), 8)
    c.check("full 2-shift A = B = 1 exactly", a == 1.0 and b == 1.0, f"A {a!r}, B {b!r}")
    c.done()


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None and RESULTS:
        reporter.write_line("")
        reporter.write_line("acceptance summary")
        for k in sorted(RESULTS):
            reporter.write_line(RESULTS[k])
