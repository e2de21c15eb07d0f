"""Pressure, equidistribution and large deviations for group extensions of Markov shifts."""

from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    "ShiftSystem": "shift",
    "Potential": "shift",
    "birkhoff_sum": "shift",
    "enumerate_words": "shift",
    "enumerate_periodic": "shift",
    "Zd": "groups",
    "Cyclic": "groups",
    "FreeGroup": "groups",
    "Heisenberg": "groups",
    "Cocycle": "groups",
    "make_group": "groups",
    "pressure": "transfer",
    "perron": "transfer",
    "gibbs_measure": "transfer",
    "twisted_spectral_radius": "transfer",
    "PressureFunction": "xi",
    "find_xi": "xi",
    "check_assumptions": "xi",
    "SkewSystem": "skewprod",
    "BasePoint": "skewprod",
    "PeriodicAll": "skewprod",
    "PeriodicCylinder": "skewprod",
    "Preimage": "skewprod",
    "PreimageCylinder": "skewprod",
    "Budget": "skewprod",
    "constrained_sum": "skewprod",
    "extension_pressure": "skewprod",
    "amenability_gap": "skewprod",
    "check_extension_mixing": "skewprod",
    "l2_norm_growth": "skewprod",
    "TestFunction": "equidist",
    "empirical_integral": "equidist",
    "equidist_report": "equidist",
    "ld_tail": "equidist",
    "TruncationFamily": "bip",
    "truncate": "bip",
    "convergence_report": "bip",
    "parse_config": "config",
    "parse_system": "config",
    "load_config": "config",
    "oracle_suite": "oracle",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name):
    mod = _EXPORTS.get(name)
    if mod is None:
        raise AttributeError(f"module 'gurevic' has no attribute {name!r}")
    value = getattr(import_module(f".{mod}", __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return __all__
