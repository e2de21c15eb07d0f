import pytest

from gurevic.config import load_config
from gurevic.errors import BudgetError
from gurevic.oracle import brute_constrained_sum, oracle_suite
from gurevic.skewprod import PeriodicAll

from conftest import SHIFT_DEMOS


@pytest.mark.parametrize("path", SHIFT_DEMOS, ids=lambda p: p.stem)
def test_demo_passes_oracle(path):
    checks = oracle_suite(load_config(path).skew(), n_max=7)
    bad = [(c.name, c.n, c.fast, c.brute) for c in checks if not c.ok]
    assert not bad


def test_ceiling(balanced):
    with pytest.raises(BudgetError):
        brute_constrained_sum(balanced, 22, PeriodicAll())
