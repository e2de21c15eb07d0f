import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gurevic.config import parse_system
from gurevic.errors import BudgetError, ValidationError
from gurevic.shift import Potential, ShiftSystem, birkhoff_sum, enumerate_periodic, enumerate_words

from strategies import mixing_shifts, potentials

GOLDEN_TEXT = """
[shift]
states = 2
edges = 1->1, 1->2, 2->1
[potential]
depth = 1
"""


def test_golden_mean_parse():
    shift, pot, coc = parse_system(GOLDEN_TEXT)
    assert shift.state_count == 2
    assert shift.mixing and shift.period == 1
    assert np.all(pot.values == 0)
    assert coc is None


def test_two_cycle_has_period_two():
    shift, _, _ = parse_system("[shift]\nstates = 2\nedges = 1->2, 2->1\n")
    assert shift.transitive and not shift.mixing
    assert shift.period == 2


def test_potential_on_forbidden_edge_rejected():
    with pytest.raises(ValidationError):
        parse_system(GOLDEN_TEXT.replace("depth = 1", "depth = 2\nphi 2 2 = 1.0"))


def test_dead_state_rejected():
    with pytest.raises(ValidationError):
        ShiftSystem(np.array([[1, 1], [0, 0]]))


def test_birkhoff_periodic_depth2():
    shift = ShiftSystem(np.array([[1, 1], [1, 0]]))
    pot = Potential(np.array([[0.3, -0.2], [0.5, 0.0]]), 2)
    # (1,1,2) wraps to 1: edges 11, 12, 21
    assert birkhoff_sum(shift, pot, (0, 0, 1)) == pytest.approx(0.3 - 0.2 + 0.5, abs=1e-15)


def test_birkhoff_rejects_forbidden_word():
    shift = ShiftSystem(np.array([[1, 1], [1, 0]]))
    with pytest.raises(ValidationError):
        birkhoff_sum(shift, Potential.zero(2), (1, 1))


def test_lucas_numbers():
    shift = ShiftSystem(np.array([[1, 1], [1, 0]]))
    lucas = [1, 3]
    while len(lucas) < 20:
        lucas.append(lucas[-1] + lucas[-2])
    for n in range(1, 15):
        assert sum(1 for _ in enumerate_periodic(shift, n)) == lucas[n - 1]
    for n in range(1, 21):
        assert shift.trace_power(n) == lucas[n - 1]


def test_enumeration_ceiling():
    with pytest.raises(BudgetError):
        list(enumerate_periodic(ShiftSystem.full(2), 21))


@settings(max_examples=40, deadline=None)
@given(mixing_shifts(), st.integers(1, 6))
def test_periodic_count_is_trace(shift, n):
    assert sum(1 for _ in enumerate_periodic(shift, n)) == shift.trace_power(n)


@settings(max_examples=40, deadline=None)
@given(mixing_shifts(), st.integers(1, 5))
def test_words_are_allowed_and_counted(shift, n):
    words = list(enumerate_words(shift, n))
    assert all(shift.is_allowed(w) for w in words)
    a = shift.adjacency.astype(np.int64)
    assert len(words) == int(np.linalg.matrix_power(a, n - 1).sum())


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_birkhoff_additive_under_rotation(data):
    shift = data.draw(mixing_shifts())
    pot = data.draw(potentials(shift))
    words = list(enumerate_periodic(shift, 4))
    w = data.draw(st.sampled_from(words))
    rotated = w[1:] + w[:1]
    assert math.isclose(birkhoff_sum(shift, pot, w), birkhoff_sum(shift, pot, rotated), abs_tol=1e-12)
