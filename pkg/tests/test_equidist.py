import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gurevic.equidist import (
    TestFunction,
    empirical_integral,
    empirical_sequence,
    equidist_report,
    gibbs_limit,
    ld_tail,
    ld_tail_brute,
    tail_masses,
)
from gurevic.errors import EmptySetError, ValidationError
from gurevic.groups import Zd
from gurevic.oracle import default_modes
from gurevic.skewprod import PeriodicAll

from strategies import skew_systems

G11 = TestFunction.indicator(2, (0, 0))


def test_exact_value_at_six(balanced):
    assert empirical_integral(balanced, PeriodicAll(), 6, G11) == pytest.approx(0.2, abs=1e-14)
    assert empirical_integral(balanced, PeriodicAll(), 6, G11, "brute") == pytest.approx(0.2, abs=1e-14)


def test_closed_form_sequence(balanced):
    # balanced cyclic words: the average of 1[11] is (n/2 - 1) / (n - 1) / 2 ... = 1/4 - 1/(4(n-1))
    seq = empirical_sequence(balanced, PeriodicAll(), 20, G11)
    for n in range(4, 21, 2):
        assert seq[n - 1] == pytest.approx(0.25 - 1 / (4 * (n - 1)), abs=1e-12)
    assert np.isnan(seq[4])


def test_limit_is_quarter(balanced):
    assert gibbs_limit(balanced, G11) == pytest.approx(0.25, abs=1e-12)


def test_empty_set_raises(balanced):
    with pytest.raises(EmptySetError, match="empty"):
        empirical_integral(balanced, PeriodicAll(), 5, G11)


def test_modes_agree(balanced):
    rep = equidist_report(balanced, G11, [20], default_modes(balanced.shift))
    vals = [r.empirical for r in rep.rows]
    assert max(vals) - min(vals) <= 0.05
    assert all(r.error == "" for r in rep.rows)


def test_tail_at_six(balanced):
    assert ld_tail_brute(balanced, G11, 0.2, 6, limit=0.25) == pytest.approx(0.1, abs=1e-14)
    assert tail_masses(balanced, G11, 0.2, 6, limit=0.25)[5] == pytest.approx(0.1, abs=1e-14)


def test_tail_closed_form(balanced):
    # only the two alternating words sit far from 1/4
    t = tail_masses(balanced, G11, 0.2, 20, limit=0.25)
    for n in range(8, 21, 2):
        assert t[n - 1] == pytest.approx(2 / math.comb(n, n // 2), rel=1e-12)


def test_ld_fit(balanced):
    fit = ld_tail(balanced, G11, 0.2, list(range(8, 21)))
    assert fit.eta > 0 and fit.r2 >= 0.9


@settings(max_examples=30, deadline=None)
@given(skew_systems(group=Zd(1)), st.integers(2, 6), st.data())
def test_dp_empirical_matches_brute(sys, n, data):
    s = sys.shift.state_count
    vals = data.draw(st.lists(st.floats(-1, 1), min_size=s * s, max_size=s * s))
    g = TestFunction(np.where(sys.shift.adjacency, np.array(vals).reshape(s, s), 0.0), 2)
    mode = data.draw(st.sampled_from(default_modes(sys.shift)))
    try:
        brute = empirical_integral(sys, mode, n, g, "brute")
    except EmptySetError:
        with pytest.raises(EmptySetError):
            empirical_integral(sys, mode, n, g)
        return
    assert empirical_integral(sys, mode, n, g) == pytest.approx(brute, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(skew_systems(group=Zd(1)), st.integers(2, 6), st.floats(0.01, 0.5))
def test_dp_tail_matches_brute(sys, n, eps):
    s = sys.shift.state_count
    g = TestFunction.indicator(s, (0,))
    limit = 0.3
    brute = ld_tail_brute(sys, g, eps, n, limit=limit)
    fast = tail_masses(sys, g, eps, n, limit=limit)[n - 1]
    if math.isnan(brute):
        assert math.isnan(fast)
    else:
        assert fast == pytest.approx(brute, abs=1e-12)


def test_indicator_depth_limit():
    with pytest.raises(ValidationError):
        TestFunction.indicator(2, (0, 0, 0))
