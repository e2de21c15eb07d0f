import math
from pathlib import Path

import numpy as np
import pytest

from gurevic.config import load_config
from gurevic.groups import Cocycle, FreeGroup, Heisenberg, Zd
from gurevic.shift import Potential, ShiftSystem
from gurevic.skewprod import SkewSystem

DEMOS = Path(__file__).resolve().parents[1] / "src" / "gurevic" / "demos"
DEMO_FILES = sorted(DEMOS.glob("*.conf"))
SHIFT_DEMOS = [p for p in DEMO_FILES if p.stem != "zeta"]

GOLDEN = math.log((1 + math.sqrt(5)) / 2)


def demo(name: str):
    return load_config(DEMOS / f"{name}.conf")


def full(s: int) -> ShiftSystem:
    return ShiftSystem.full(s)


def skew(shift, group, values, phi=None):
    pot = phi if phi is not None else Potential.zero(shift.state_count)
    return SkewSystem(shift, pot, Cocycle(group, tuple(values)))


@pytest.fixture
def golden():
    return ShiftSystem(np.array([[1, 1], [1, 0]]))


@pytest.fixture
def balanced():
    return skew(full(2), Zd(1), [(1,), (-1,)])


@pytest.fixture
def z3():
    return skew(full(3), Zd(1), [(1,), (-1,), (0,)])


@pytest.fixture
def free4():
    return skew(full(4), FreeGroup(2), [(1,), (-1,), (2,), (-2,)])


@pytest.fixture
def heis4():
    return skew(full(4), Heisenberg(), [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)])


@pytest.fixture
def z2_4():
    return skew(full(4), Zd(2), [(1, 0), (-1, 0), (0, 1), (0, -1)])
