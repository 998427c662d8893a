import csv
import json
import subprocess
import sys

import pytest

from dnstein.cli import main


@pytest.fixture
def specs(tmp_path):
    (tmp_path / "sum.txt").write_text("model = indep_sum\nuniform = -1;0;1\nm = 16\n")
    (tmp_path / "k4.txt").write_text("# colouring on K4\nmodel = colouring\nn = 4\nr = 3\nm = 3\n")
    (tmp_path / "c2.txt").write_text("model = colouring\nn = 6\nr = 2\nm = 2\n")
    (tmp_path / "bad.txt").write_text("model = nothing\n")
    return tmp_path


def test_build_dn(tmp_path):
    rep = tmp_path / "r.json"
    rc = main(["build-dn", "--n", "16", "--sigma", "1,0.2;0.2,2", "--check", "--out", str(tmp_path / "dn.csv"),
               "--report", str(rep)])
    assert rc == 0
    out = json.loads(rep.read_text())
    assert out["ok"] and out["dim"] == 2 and out["discarded_mass"] <= 1e-10
    assert (tmp_path / "dn.csv").read_text().startswith("# ")
    assert main(["build-dn", "--n", "16", "--dim", "3", "--sigma", "1,0;0,1"]) == 2


def test_verify_lemma(tmp_path):
    out = tmp_path / "l.json"
    assert main(["verify-lemma", "--lemma", "2.2a", "--dim", "1", "--n", "64", "--delta", "1",
                 "--trials", "3", "--seed", "5", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["cases"] == 6 and data["ok"]  # Sigma in {1, 4}, three trials each
    assert main(["verify-lemma", "--lemma", "2.1", "--dim", "1", "--n", "4,16", "--out", str(out)]) == 0
    assert main(["verify-lemma", "--lemma", "2.1iii", "--dim", "1", "--n", "16", "--trials", "2",
                 "--out", str(out)]) == 0


def test_diagnose(specs):
    out = specs / "d.json"
    assert main(["diagnose", "--model", str(specs / "k4.txt"), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["R1_mean_abs"] <= 1e-12
    assert main(["diagnose", "--model", str(specs / "sum.txt"), "--out", str(out)]) == 0
    # the m = 2 colouring is degenerate and must not report success
    assert main(["diagnose", "--model", str(specs / "c2.txt"), "--out", str(out)]) == 1
    assert main(["diagnose", "--model", str(specs / "bad.txt")]) == 2


def test_colouring(tmp_path):
    out = tmp_path / "c.json"
    assert main(["colouring", "--n", "4", "--r", "3", "--m", "3", "--p", "0.5,0.3,0.2", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["mode"] == "exact" and all(c["ok"] for c in data["checks"])


def test_tv_curve(specs):
    out = specs / "c.csv"
    assert main(["tv-curve", "--model", str(specs / "sum.txt"), "--sizes", "16,32,64", "--out", str(out),
                 "--plot", str(specs / "curve")]) == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["size", "tv", "err", "slack", "seconds"] and len(rows) == 4
    assert (specs / "curve.dat").exists() and (specs / "curve.png").stat().st_size > 0
    # the ratio over one quadrupling sits near 4, far outside [1.6, 2.5]
    assert main(["tv-curve", "--model", str(specs / "sum.txt"), "--sizes", "16,64",
                 "--expect-ratio", "1.6,2.5"]) == 1
    assert main(["tv-curve", "--model", str(specs / "c2.txt"), "--sizes", "6,8"]) == 1


def test_bound_report(specs):
    out = specs / "b.json"
    assert main(["bound-report", "--model", str(specs / "k4.txt"), "--out", str(out),
                 "--plot", str(specs / "bounds")]) == 0
    data = json.loads(out.read_text())
    assert len(data["thm32_terms"]) == 6 and data["ok"]
    assert (specs / "bounds.png").stat().st_size > 0


def test_console_script_seed_flag(specs):
    cmd = [sys.executable, "-m", "dnstein.cli", "--seed", "3", "--threads", "2", "colouring",
           "--n", "3", "--r", "2", "--m", "3"]
    res = subprocess.run(cmd, capture_output=True, text=True, timeout=120)
    assert res.returncode == 0, res.stderr
    assert json.loads(res.stdout)["ok"]
