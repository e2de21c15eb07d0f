"""Command-line front end.

    gurevic <subcommand> --config FILE [--out DIR] [--n-max N] [--tol X]
                         [--plot-data] [--budget-entries N]

Scalars go to stdout (and ``<subcommand>.json`` under ``--out``) as one flat
JSON object; sequences go to ``<subcommand>.csv``.  Every file carries the run
manifest: a ``#`` first line in CSV, a ``"manifest"`` key in JSON.  Apart from
the manifest's timings, output is a deterministic function of the config and
flags.  Errors are a JSON object on stderr; exit codes are 0 (ok), 2 (config),
3 (budget), 4 (no convergence or oracle mismatch).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

SUBCOMMANDS = ("pressure", "xi", "extension", "equidist", "ld", "amenability-gap", "bip-converge", "oracle")
SIG = 12
ORACLE_WORD_BUDGET = 2_000_000  # largest S**n enumerated by the oracle subcommand


def _apply_threads():
    # must run before numpy is imported
    n = os.environ.get("GUREVIC_THREADS")
    if n and n.isdigit() and int(n) > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ[var] = n


def num(x):
    """Round to 12 significant digits; non-finite values become strings."""
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, int):
        return x
    try:
        x = float(x)
    except (TypeError, ValueError):
        return str(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return float(f"{x:.{SIG}g}")


def clean(obj):
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if hasattr(obj, "tolist"):
        return clean(obj.tolist())
    return num(obj)


def _cell(x) -> str:
    x = num(x)
    if isinstance(x, float):
        return f"{x:.{SIG}g}"
    s = str(x)
    return f'"{s}"' if ("," in s or '"' in s) else s


class Run:
    """Collects the manifest, timings and output of one invocation."""

    def __init__(self, sub: str, cfg, args):
        from . import __version__

        self.sub, self.cfg, self.args = sub, cfg, args
        self.params: dict = {}
        self.timings: dict = {}
        self.files: list = []
        self.table = None
        self.version = __version__

    def timed(self, name, fn, *a, **kw):
        t0 = time.perf_counter()
        try:
            return fn(*a, **kw)
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)

    def manifest(self) -> dict:
        return {
            "config_sha256": self.cfg.digest,
            "subcommand": self.sub,
            "parameters": clean(self.params),
            "version": self.version,
            "timings": self.timings,
        }

    def _path(self, suffix: str) -> Path | None:
        if self.args.out is None:
            return None
        out = Path(self.args.out)
        out.mkdir(parents=True, exist_ok=True)
        return out / f"{self.sub}{suffix}"

    def write_csv(self, header, rows, suffix=".csv"):
        body = ",".join(header) + "\n" + "".join(",".join(_cell(c) for c in r) + "\n" for r in rows)
        path = self._path(suffix)
        if path is None:
            # no output directory: the table travels inside the JSON document
            self.table = {"columns": list(header), "rows": [list(r) for r in rows]}
            return
        self.files.append((path, body, "csv"))

    def write_plot(self, pairs, name: str):
        if not self.args.plot_data:
            return
        body = "".join(f"{_cell(x)} {_cell(y)}\n" for x, y in pairs)
        path = self._path(f".{name}.dat")
        if path is not None:
            self.files.append((path, body, "dat"))

    def finish(self, result: dict):
        man = self.manifest()
        for path, body, kind in self.files:
            head = "# manifest " + json.dumps(man, sort_keys=True) + "\n"
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(head + body)
        doc = clean(result)
        doc["manifest"] = man
        if self.table is not None:
            doc["table"] = clean(self.table)
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        path = self._path(".json")
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        sys.stdout.write(text)


# --- helpers -------------------------------------------------------------------


def _budget(run):
    from .skewprod import Budget

    entries = run.args.budget_entries or run.cfg.option("budget_entries")
    run.params["budget_entries"] = entries
    return Budget(entries=int(entries))


def _n_max(run, default: int) -> int:
    n = run.args.n_max or run.cfg.option("n_max") or default
    run.params["n_max"] = n
    return int(n)


def _tol(run, key="tol"):
    t = run.args.tol if run.args.tol is not None else run.cfg.option(key)
    run.params[key] = t
    return float(t)


def _modes(run, sys_):
    from .config import parse_base_point
    from .oracle import default_modes
    from .skewprod import PeriodicAll, PeriodicCylinder, Preimage, PreimageCylinder
    from .errors import ConfigError

    cfg = run.cfg
    target = sys_.group.parse(cfg.option("target"))
    a = cfg.option("cylinder") - 1
    if not 0 <= a < sys_.shift.state_count:
        raise ConfigError(f"cylinder {a + 1} out of range")
    bp = cfg.option("base_point")
    o = parse_base_point(bp, sys_.shift) if bp else default_modes(sys_.shift)[2].o
    make = {
        "periodic": lambda: PeriodicAll(target),
        "periodic-cylinder": lambda: PeriodicCylinder(a, target),
        "preimage": lambda: Preimage(o, target),
        "preimage-cylinder": lambda: PreimageCylinder(a, o, target),
    }
    out = []
    for name in (x.strip() for x in cfg.option("modes").split(",")):
        if name not in make:
            raise ConfigError(f"unknown mode {name!r}; expected one of {', '.join(make)}")
        out.append(make[name]())
    run.params["modes"] = cfg.option("modes")
    run.params["base_point"] = str(o)
    return out


def _single_mode(run, sys_):
    from .errors import ConfigError

    name = run.cfg.option("mode")
    saved = run.cfg.options.get("modes")
    run.cfg.options["modes"] = name
    try:
        modes = _modes(run, sys_)
    finally:
        if saved is None:
            run.cfg.options.pop("modes")
        else:
            run.cfg.options["modes"] = saved
    if len(modes) != 1:
        raise ConfigError("option 'mode' takes a single mode")
    return modes[0]


def _testfunction(run, sys_):
    from .equidist import TestFunction

    g = run.cfg.testfunction or TestFunction.indicator(sys_.shift.state_count, (0, 0))
    run.params["g"] = g.name
    return g


def _n_list(run, default):
    from .config import parse_int_list

    text = run.cfg.option("n_list")
    out = parse_int_list(text) if text else list(default)
    if run.args.n_max:
        out = [n for n in out if n <= run.args.n_max] or [run.args.n_max]
    run.params["n_list"] = out
    return out


def _system(run):
    sys_ = run.cfg.skew()
    return sys_


# --- subcommands ---------------------------------------------------------------


def cmd_pressure(run):
    from .transfer import pressure_via_periodic, shift_perron

    sys_ = _system(run)
    tol = _tol(run)
    pd = run.timed("perron", shift_perron, sys_.shift, sys_.potential, tol=tol)
    n = _n_max(run, 20)
    seq = run.timed("periodic", pressure_via_periodic, sys_.shift, sys_.potential, n)
    run.write_csv(("n", "log_trace_over_n"), seq)
    run.write_plot(seq, "periodic")
    if sys_.shift.mixing:
        periodic, kind = seq[-1][1], "last value"
    else:
        # without mixing the sequence vanishes off multiples of the period; take the
        # largest of the last `period` terms as the limsup estimate
        tail = seq[-sys_.shift.period :]
        periodic, kind = max(v for _, v in tail), "limsup over the computed range"
    return {
        "periodic_estimate": periodic,
        "periodic_estimate_kind": kind,
        "pressure": pd.pressure,
        "perron_root": pd.lam,
        "right_eigenvector": pd.right,
        "left_eigenvector": pd.left,
        "residual": pd.residual,
        "method": pd.method,
        "period": sys_.shift.period,
        "mixing": sys_.shift.mixing,
        "states": sys_.shift.state_count,
    }


def cmd_xi(run):
    from .xi import PressureFunction, check_assumptions, find_xi

    sys_ = _system(run)
    tol = _tol(run, "xi_tol")
    delta = run.cfg.family.delta if run.cfg.family is not None else math.inf
    pf = PressureFunction(sys_.shift, sys_.potential, sys_.f, delta)
    res = run.timed("find_xi", find_xi, pf, tol=tol, seed=run.cfg.option("seed"))
    rep = run.timed("assumptions", check_assumptions, sys_, delta=delta, horizon=run.cfg.option("horizon"), tol=tol)
    out = res.as_dict()
    out["assumption_report"] = rep.as_dict()
    return out


def cmd_extension(run):
    from .errors import BudgetError
    from .skewprod import extension_pressure, l2_norm_growth

    sys_ = _system(run)
    budget = _budget(run)
    n = _n_max(run, 40)
    mode = _single_mode(run, sys_)
    est = run.timed("extension_pressure", extension_pressure, sys_, n, mode, budget=budget)
    run.write_csv(("n", "Z_n", "log_Z_n_over_n", "method", "ball_size"), est.rows)
    run.write_plot([(r[0], r[2]) for r in est.rows], "rate")
    out = est.as_dict()
    cap = budget.cap(sys_.group.kind)
    n_l2 = n if cap is None else min(n, cap)
    try:
        l2 = run.timed("l2_norm_growth", l2_norm_growth, sys_, n_l2, budget=budget)
        out["l2_norm_growth"] = [{"n": k, "rate": v} for k, v in l2]
        out["l2_rate_last"] = l2[-1][1]
    except BudgetError as exc:
        out["l2_norm_growth"] = []
        out["l2_note"] = str(exc)
    return out


def cmd_equidist(run):
    from .equidist import equidist_report

    sys_ = _system(run)
    budget = _budget(run)
    g = _testfunction(run, sys_)
    n_list = _n_list(run, (6, 10, 14, 18, 20))
    modes = _modes(run, sys_)
    rep = run.timed("equidist", equidist_report, sys_, g, n_list, modes, budget=budget)
    run.write_csv(("mode", "n", "g_name", "empirical", "limit", "abs_diff", "error"), [r.csv() for r in rep.rows])
    run.write_plot([(r.n, r.abs_diff) for r in rep.rows], "abs_diff")
    return {"limit": rep.limit, "xi": rep.xi, "base_point": rep.base_point, "g_name": g.name}


def cmd_ld(run):
    from .equidist import equidist_report, ld_tail

    sys_ = _system(run)
    budget = _budget(run)
    g = _testfunction(run, sys_)
    eps = run.cfg.option("epsilon")
    run.params["epsilon"] = eps
    n_list = _n_list(run, range(8, 21))
    mode = _single_mode(run, sys_)
    rep = run.timed("equidist", equidist_report, sys_, g, n_list, [mode], budget=budget)
    fit = run.timed("ld_tail", ld_tail, sys_, g, eps, n_list, mode, rep.limit, budget)
    tails = dict(zip(fit.n, fit.tail_mass))
    rows = [
        (r.mode, r.n, r.g_name, r.empirical, r.limit, r.abs_diff, eps, tails.get(r.n, math.nan), fit.eta, fit.residual)
        for r in rep.rows
    ]
    run.write_csv(
        ("mode", "n", "g_name", "empirical", "limit", "abs_diff", "epsilon", "tail_mass", "eta_fit", "residual"), rows
    )
    run.write_plot(list(zip(fit.n, fit.tail_mass)), "tail")
    return {"limit": rep.limit, **fit.as_dict()}


def cmd_amenability_gap(run):
    from .skewprod import amenability_gap

    sys_ = _system(run)
    budget = _budget(run)
    n = _n_max(run, 40)
    return run.timed("amenability_gap", amenability_gap, sys_, n, budget=budget)


def cmd_bip_converge(run):
    from .bip import CSV_HEADER, MATRIX_BUDGET, convergence_report
    from .errors import ConfigError

    fam = run.cfg.family
    if fam is None:
        raise ConfigError("bip-converge needs a [family] section")
    run.params["family"] = {"name": fam.name, "beta": fam.beta}
    n_list = _n_list(run, (64, 128, 256, 512, 1024, 2048, 4096))
    budget = run.args.budget_entries or MATRIX_BUDGET
    run.params["matrix_budget"] = budget
    rows = run.timed("convergence", convergence_report, fam, n_list, budget)
    run.write_csv(CSV_HEADER, [r.csv() for r in rows])
    run.write_plot([(r.n, r.pressure) for r in rows], "pressure")
    last = rows[-1]
    return {
        "limit_pressure": fam.limit_pressure,
        "delta": fam.delta,
        "last_n": last.n,
        "last_pressure": last.pressure,
        "last_gap": fam.limit_pressure - last.pressure,
        "bracket_contains_limit": all(r.lower <= fam.limit_pressure <= r.upper for r in rows),
    }


def cmd_oracle(run):
    from .oracle import oracle_suite

    sys_ = _system(run)
    s = sys_.shift.state_count
    n = run.args.n_max or run.cfg.option("oracle_n")
    n = int(min(n, run.cfg.option("oracle_ceiling"), max(1, int(math.log(ORACLE_WORD_BUDGET) / math.log(max(s, 2))))))
    run.params["n_max"] = n
    checks = run.timed("oracle", oracle_suite, sys_, n)
    run.write_csv(
        ("check", "n", "fast", "brute", "rel_error", "ok"),
        [(c.name, c.n, c.fast, c.brute, c.rel_error, int(c.ok)) for c in checks],
    )
    bad = [c for c in checks if not c.ok]
    return {"checks": len(checks), "failures": len(bad), "n_max": n, "ok": not bad}


COMMANDS = {
    "pressure": cmd_pressure,
    "xi": cmd_xi,
    "extension": cmd_extension,
    "equidist": cmd_equidist,
    "ld": cmd_ld,
    "amenability-gap": cmd_amenability_gap,
    "bip-converge": cmd_bip_converge,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gurevic", description="Pressure of group extensions of Markov shifts.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="configuration file")
    p.add_argument("--out", help="directory for JSON/CSV output")
    p.add_argument("--n-max", type=int, help="largest word length")
    p.add_argument("--tol", type=float, help="numerical tolerance")
    p.add_argument("--plot-data", action="store_true", help="also write two-column .dat files (needs --out)")
    p.add_argument("--budget-entries", type=int, help="DP table entry budget")
    return p


def _error(exc, code: int) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("line", "column", "achieved"):
        v = getattr(exc, attr, None)
        if v is not None:
            doc[attr] = clean(v)
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _apply_threads()
    from .config import load_config
    from .errors import GurevicError

    try:
        cfg = load_config(args.config)
        run = Run(args.subcommand, cfg, args)
        result = COMMANDS[args.subcommand](run)
        run.finish(result)
    except GurevicError as exc:
        return _error(exc, exc.exit_code)
    except MemoryError as exc:
        return _error(exc, 3)
    if args.subcommand == "oracle" and not result["ok"]:
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
