import json
import math

import pytest

from gurevic.cli import main

from conftest import DEMOS, GOLDEN


def run(capsys, *args):
    code = main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


def test_pressure_golden(capsys):
    code, out, _ = run(capsys, "pressure", "--config", str(DEMOS / "golden_mean.conf"))
    assert code == 0
    doc = json.loads(out)
    assert abs(doc["pressure"] - 0.481212) < 5e-7
    assert abs(doc["pressure"] - GOLDEN) < 1e-11
    assert doc["manifest"]["subcommand"] == "pressure"
    assert len(doc["manifest"]["config_sha256"]) == 64


def test_outputs_deterministic(tmp_path, capsys):
    bodies = []
    for k in range(2):
        out = tmp_path / str(k)
        assert main(["ld", "--config", str(DEMOS / "full2_balanced.conf"), "--out", str(out), "--plot-data"]) == 0
        capsys.readouterr()
        csv = (out / "ld.csv").read_text(encoding="utf-8").split("\n", 1)
        assert csv[0].startswith("# manifest ")
        doc = json.loads((out / "ld.json").read_text(encoding="utf-8"))
        doc["manifest"].pop("timings")
        dat = (out / "ld.tail.dat").read_text(encoding="utf-8").split("\n", 1)
        assert dat[0].startswith("# manifest ")
        bodies.append((csv[1], json.dumps(doc, sort_keys=True), dat[1]))
    assert bodies[0] == bodies[1]
    header = bodies[0][0].splitlines()[0]
    assert header == "mode,n,g_name,empirical,limit,abs_diff,epsilon,tail_mass,eta_fit,residual"


def test_config_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.conf"
    bad.write_text("[shift]\nstates = 2\nedges = 1->5\n", encoding="utf-8")
    code, _, err = run(capsys, "pressure", "--config", str(bad))
    assert code == 2
    doc = json.loads(err)
    assert doc["error"] == "ConfigError" and doc["line"] == 3


def test_budget_error_exit_3(capsys):
    code, _, err = run(
        capsys, "extension", "--config", str(DEMOS / "heisenberg_full4.conf"), "--n-max", "30", "--budget-entries", "1000"
    )
    assert code == 3
    assert json.loads(err)["exit_code"] == 3


def test_convergence_error_exit_4(tmp_path, capsys):
    conf = tmp_path / "drift.conf"
    conf.write_text("[shift]\nstates = 2\nfull = true\n[cocycle]\ngroup = zd 1\npsi 1 = 1\npsi 2 = 1\n", encoding="utf-8")
    code, _, err = run(capsys, "xi", "--config", str(conf))
    assert code == 4
    # p(w) = log 2 + w is affine: no strict minimum
    assert json.loads(err)["error"] in ("ConvergenceError", "FlatDirectionError")


def test_xi_flat_document(capsys):
    code, out, _ = run(capsys, "xi", "--config", str(DEMOS / "xi_closed_form.conf"))
    assert code == 0
    doc = json.loads(out)
    assert abs(doc["xi"][0] + 0.5) < 1e-8
    for key in ("gradient_norm", "pressure_at_xi", "hessian_spectrum", "assumption_report", "manifest"):
        assert key in doc


def test_missing_file_exit_2(capsys):
    code, _, _ = run(capsys, "pressure", "--config", "/nonexistent.conf")
    assert code == 2


def test_amenability_gap_free(capsys):
    code, out, _ = run(capsys, "amenability-gap", "--config", str(DEMOS / "free2_full4.conf"))
    assert code == 0
    r = json.loads(out)
    assert abs(r["G_bar"]["estimate"] - math.log(4)) < 0.01
    assert abs(r["G"]["estimate"] - math.log(2 * math.sqrt(3))) < 0.01
    assert abs(r["gap"] - 0.1438) < 0.01
    assert r["gap"] > r["bracket_width"]


def test_amenability_gap_heisenberg(capsys):
    code, out, _ = run(capsys, "amenability-gap", "--config", str(DEMOS / "heisenberg_full4.conf"))
    assert code == 0
    r = json.loads(out)
    assert r["gap"] < r["bracket_width"]
    assert not r["gap_exceeds_bracket"]


def test_oracle_subcommand(capsys):
    code, out, _ = run(capsys, "oracle", "--config", str(DEMOS / "full3_z.conf"), "--n-max", "6")
    assert code == 0
    doc = json.loads(out)
    assert doc["ok"] and doc["failures"] == 0
    assert doc["table"]["columns"][0] == "check"


def test_bip_subcommand(tmp_path, capsys):
    code, _, _ = run(capsys, "bip-converge", "--config", str(DEMOS / "zeta.conf"), "--n-max", "256", "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "bip-converge.csv").read_text().splitlines()
    assert lines[1].startswith("N,pressure_N")
    assert len(lines) == 2 + 3  # 64, 128, 256


def test_threads_env(monkeypatch, capsys):
    monkeypatch.setenv("GUREVIC_THREADS", "1")
    code, _, _ = run(capsys, "pressure", "--config", str(DEMOS / "golden_mean.conf"))
    import os

    assert code == 0 and os.environ["OMP_NUM_THREADS"] == "1"


def test_non_finite_serialised():
    from gurevic.cli import clean

    assert clean([math.nan, math.inf, -math.inf, 1 / 3]) == ["nan", "inf", "-inf", 0.333333333333]
