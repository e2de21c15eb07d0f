import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gurevic.errors import BudgetError
from gurevic.groups import Cocycle, FreeGroup, Zd
from gurevic.oracle import brute_constrained_sum, default_modes
from gurevic.shift import Potential, ShiftSystem
from gurevic.skewprod import (
    BasePoint,
    Budget,
    PeriodicAll,
    PeriodicCylinder,
    Preimage,
    PreimageCylinder,
    SkewSystem,
    amenability_gap,
    check_extension_mixing,
    constrained_sum,
    constrained_table,
    eta_series_diagnostic,
    extension_pressure,
    fourier_constrained_sum,
    fourier_log_sums,
    growth_fit,
    l2_norm_growth,
    lattice_index,
    local_limit_ratio,
    radial_log_sums,
    radial_preconditions,
)

from conftest import demo, full, skew
from strategies import skew_systems

LOG4 = math.log(4)
LOG_2_SQRT3 = math.log(2 * math.sqrt(3))


def test_balanced_count(balanced):
    # closed walks of length 4 returning to 0: C(4, 2)
    for engine in ("array", "dict"):
        assert constrained_sum(balanced, 4, engine=engine) == pytest.approx(6.0, rel=1e-12)
    assert constrained_sum(balanced, 5) == 0.0


def test_free_group_return_counts(free4):
    # 4-regular tree: 4, 28, 232
    table = constrained_table(free4, 6, PeriodicAll())
    assert np.allclose(np.exp(table.log_z[1::2]), [4, 28, 232], rtol=1e-12)
    assert np.all(np.isneginf(table.log_z[0::2]))


def test_heisenberg_return_counts(heis4):
    # frozen from enumeration; length 8 differs from the free group (2092)
    table = constrained_table(heis4, 8, PeriodicAll())
    assert np.allclose(np.exp(table.log_z[1::2]), [4, 28, 232, 2156], rtol=1e-12)


def test_z2_return_counts(z2_4):
    # binomial(2m, m)^2
    lz = fourier_log_sums(z2_4, 8)
    assert np.allclose(np.exp(lz[1::2]), [4, 36, 400, 4900], rtol=1e-8)


def test_fourier_off_lattice_target(balanced):
    assert fourier_constrained_sum(balanced, 4) == pytest.approx(6.0, rel=1e-10)
    assert fourier_constrained_sum(balanced, 4, m=(2,)) == pytest.approx(4.0, rel=1e-10)
    assert fourier_constrained_sum(balanced, 4, m=(5,)) == 0.0


@settings(max_examples=40, deadline=None)
@given(skew_systems(), st.integers(1, 6), st.data())
def test_dp_matches_enumeration(sys, n, data):
    mode = data.draw(st.sampled_from(default_modes(sys.shift)))
    brute = brute_constrained_sum(sys, n, mode)
    for engine in ("array", "dict"):
        fast = constrained_sum(sys, n, mode, engine=engine)
        assert fast == pytest.approx(brute, rel=1e-10, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(skew_systems(group=Zd(1)), st.integers(1, 8), st.integers(-2, 2))
def test_fourier_matches_dp(sys, n, m):
    dp = constrained_sum(sys, n, PeriodicAll((m,)))
    assert fourier_constrained_sum(sys, n, m=(m,)) == pytest.approx(dp, rel=1e-8, abs=1e-10 * max(1.0, dp))


@settings(max_examples=20, deadline=None)
@given(skew_systems(group=Zd(2)), st.integers(1, 7))
def test_fourier_matches_dp_rank2(sys, n):
    dp = constrained_sum(sys, n)
    assert fourier_constrained_sum(sys, n) == pytest.approx(dp, rel=1e-8, abs=1e-10 * max(1.0, dp))


@settings(max_examples=20, deadline=None)
@given(skew_systems(group=FreeGroup(2)), st.integers(1, 6))
def test_pruning_is_exact(sys, n):
    a = constrained_table(sys, n, PeriodicAll())
    from gurevic.skewprod import dp_layers

    # unpruned run reads the same identity rows
    vals = []
    for layer in dp_layers(sys, n, PeriodicAll(), prune=False):
        rows = layer.rows_for(sys.group.identity)
        v = float(np.trace(layer.values[rows, 0], axis1=-2, axis2=-1).sum()) if rows.any() else 0.0
        vals.append(math.log(v) + layer.log_scale if v > 0 else -math.inf)
    assert np.allclose(a.log_z, vals, rtol=1e-12, equal_nan=False)


def test_radial_matches_dp(free4):
    assert radial_preconditions(free4) is None
    lz = radial_log_sums(free4, 10)
    dp = constrained_table(free4, 10, PeriodicAll()).log_z
    fin = np.isfinite(dp)
    assert np.array_equal(fin, np.isfinite(lz))
    assert np.allclose(lz[fin], dp[fin], rtol=1e-12)


def test_radial_refuses_non_constant_potential():
    sys = skew(full(4), FreeGroup(2), [(1,), (-1,), (2,), (-2,)], Potential.from_states([0, 0, 0, 0.1]))
    assert radial_preconditions(sys) is not None


def test_mixing_certificates(balanced, z3, free4, heis4):
    assert check_extension_mixing(balanced).status == "failed"
    assert check_extension_mixing(balanced).lattice_index == 2
    assert check_extension_mixing(z3).status == "verified"
    assert check_extension_mixing(free4).status == "failed"
    assert check_extension_mixing(heis4).lattice_index == 2


def test_lattice_index():
    assert lattice_index(np.array([[1, 0], [0, 2]]), 2) == 2
    assert math.isinf(lattice_index(np.array([[1, 0]]), 2))


def test_local_limit_balanced(balanced):
    # Z_n(0) sqrt(n) 2^-n -> 2 / sqrt(2 pi) on even n (lattice index 2)
    r = local_limit_ratio(balanced, None, 200)
    assert abs(r / math.sqrt(2 / math.pi) - 1) < 0.02


def test_local_limit_ratio_settles(z3):
    a, b = local_limit_ratio(z3, None, 150), local_limit_ratio(z3, None, 200)
    assert a > 0 and abs(a - b) / b < 0.01


def test_growth_fit_recovers_parameters():
    n = np.arange(20, 80, dtype=float)
    p, kappa, alpha, r2 = growth_fit(n, 0.3 + 1.1 * n - 1.5 * np.log(n))
    assert p == pytest.approx(1.1, abs=1e-10)
    assert kappa == pytest.approx(1.5, abs=1e-8)
    assert r2 == pytest.approx(1.0)


def test_extension_pressure_bounds(z2_4):
    ep = extension_pressure(z2_4, 60)
    assert ep.certified_lower <= ep.certified_upper + 1e-12
    assert ep.certified_upper == pytest.approx(LOG4, abs=1e-10)
    assert abs(ep.estimate - LOG4) < 0.01
    seq = ep.certified_lower_sequence
    assert all(b >= a for a, b in zip(seq, seq[1:]))


def test_free_group_strict_gap(free4):
    gap = amenability_gap(free4, 200)
    assert abs(gap["G"]["estimate"] - LOG_2_SQRT3) < 0.01
    assert abs(gap["G_bar"]["estimate"] - LOG4) < 0.01
    assert gap["gap"] >= 0.13 and gap["gap_exceeds_bracket"]


def test_budget_caps(free4):
    with pytest.raises(BudgetError):
        constrained_table(free4, 15, PeriodicAll(), engine="array")
    with pytest.raises(BudgetError):
        constrained_table(free4, 10, PeriodicAll(), budget=Budget(entries=1000))


def test_l2_growth_between_bounds(free4):
    rows = l2_norm_growth(free4, 14)
    n, rate = rows[-1]
    z = constrained_table(free4, 14, PeriodicAll()).log_z[-1]
    # the l2 norm dominates the return mass from one start state
    assert rate >= (z - math.log(4)) / n - 1e-12
    assert rate <= LOG4 - 0.05


def test_l2_growth_amenable(z3):
    assert abs(l2_norm_growth(z3, 30)[-1][1] - math.log(3)) < 0.1


def test_preimage_modes_agree_on_counts(balanced):
    o = BasePoint((), (0, 1))
    n = 6
    for mode in (Preimage(o), PreimageCylinder(0, o), PeriodicCylinder(0)):
        assert constrained_sum(balanced, n, mode) == pytest.approx(brute_constrained_sum(balanced, n, mode))


def test_eta_series_trivial_group():
    # (L^n 1_[1])(o) = 2^(n-1) on the full 2-shift
    sys = SkewSystem(full(2), Potential.zero(2), Cocycle.trivial(2))
    d = eta_series_diagnostic(sys, BasePoint((), (0,)), None, 4.0, 30)
    exact = sum(2.0 ** (n - 1) / 4.0**n for n in range(1, 31))
    assert d.value == pytest.approx(exact, rel=1e-12)
    assert d.remainder_bound == pytest.approx(0.5**31, rel=1e-6)


def test_demo_skew_parse():
    sys = demo("heisenberg_full4").skew()
    assert sys.group.kind == "heisenberg" and sys.d == 2
