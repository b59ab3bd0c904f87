import csv
import io
import json
import math
import shutil
from pathlib import Path

import numpy as np
import pytest

from ihoc import cli
from ihoc.catalog import build, entry_ids

R2 = math.sqrt(2.0)


def write(path: Path, text: str) -> str:
    path.write_text(text, encoding="utf-8")
    return str(path)


def exp_weights(a: str) -> str:
    return f"""
weights:
  omega: {{family: exponential, params: ["2"]}}
  nu: {{family: exponential, params: ["{a}"]}}
  eta: {{family: constant, params: ["1"]}}
p: "2"
"""


@pytest.fixture(autouse=True)
def no_env(monkeypatch):
    monkeypatch.delenv(cli.ENV_OUT, raising=False)


@pytest.fixture(scope="module")
def catalog_runs(tmp_path_factory):
    """One full ``verify`` per catalog entry: {id: (exit code, report path)}."""
    root = tmp_path_factory.mktemp("catalog")
    out = root / "out"
    runs = {}
    for eid in entry_ids():
        cfg = write(root / f"{eid}.yaml", f"problem: {eid}\n")
        code = cli.main(["verify", "--config", cfg, "--out", str(out)])
        paths = sorted(out.glob(f"{eid}-*.json"))
        paths = [p for p in paths if not p.name.endswith(".timings.json")]
        assert len(paths) == 1
        runs[eid] = (code, paths[0])
    return runs


# weights

def test_weights_exit_codes(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["weights", "--config", write(tmp_path / "a3.yaml", exp_weights("3")), "--out", str(out)]) == 0
    assert cli.main(["weights", "--config", write(tmp_path / "a5.yaml", exp_weights("5")), "--out", str(out)]) == 1
    docs = [json.loads(p.read_text()) for p in out.glob("weights-*.json")]
    fails = [d for d in docs if d["overall"] == "Fail"]
    assert len(fails) == 1 and fails[0]["certificates"]["F6"]["verdict"] == "Fail"


def test_weights_property_subset(tmp_path):
    text = """
weights:
  omega: {family: exponential, params: ["1"]}
  nu: {family: weibull, params: ["2"]}
properties: [F4]
"""
    out = tmp_path / "out"
    # log-derivative (k-1)/t - k t^(k-1) is unbounded at both ends
    assert cli.main(["weights", "--config", write(tmp_path / "w.yaml", text), "--out", str(out)]) == 1
    doc = json.loads(next(out.glob("weights-*.json")).read_text())
    assert list(doc["certificates"]) == ["F4"]


def test_verify_inconclusive_exit(tmp_path):
    # p = -e^{-2t} has fallen only to e^{-6} of its size by t = 3
    cfg = write(tmp_path / "short.yaml", 'problem: RegulatorB1\nhorizon: "3"\n')
    out = tmp_path / "out"
    assert cli.main(["verify", "--config", cfg, "--out", str(out)]) == 3
    rep = json.loads(next(p for p in out.glob("*.json") if "timings" not in p.name).read_text())
    assert rep["overall"] == "Inconclusive"
    assert rep["suites"]["normality"]["conditions"]["TransversalityNorm"]["verdict"] == "Inconclusive"


@pytest.mark.parametrize("text", [
    "problem: [unclosed\n",
    "problem: NoSuchEntry\n",
    "problem: RegulatorB2\nhorizon: \"-1\"\n",
    "problem: RegulatorB2\nhorizon: abc\n",
    "problem: RegulatorB2\nsuites: [bogus]\n",
    "problem: RegulatorB2\ntolerances: {adjoint: \"0\"}\n",
    "problem: RegulatorB2\nparams: {bogus: \"1\"}\n",
    "problem: RegulatorB2\nunknown_key: 1\n",
    "- just\n- a list\n",
])
def test_config_errors_exit_two(tmp_path, text):
    cfg = write(tmp_path / "bad.yaml", text)
    assert cli.main(["weights", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert cli.main(["verify", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_usage_errors_exit_two(tmp_path):
    assert cli.main(["verify"]) == 2
    assert cli.main(["frobnicate"]) == 2
    assert cli.main(["verify", "--config", str(tmp_path / "missing.yaml")]) == 2


def test_decimal_normalisation():
    a = cli.normalize_config({"problem": "RegulatorB2", "horizon": "30.0", "params": {"a": 3}})
    b = cli.normalize_config({"problem": "RegulatorB2", "horizon": 30, "params": {"a": "3.000"}})
    assert a == b
    assert cli.config_hash(a) == cli.config_hash(b)
    assert cli.config_hash(dict(a, output_dir="x")) == cli.config_hash(a)


# verify

def test_verify_regulator(catalog_runs):
    code, path = catalog_runs["RegulatorB2"]
    assert code == 0
    rep = json.loads(path.read_text())
    assert rep["lambda0"] == 1.0 and rep["branch"] == "normal"
    assert rep["adjoint_vs_closed_form"]["max_error"] <= 1e-6
    assert rep["matches_expected"] is True
    assert set(rep["suites"]) == {"normality", "sufficiency", "growth"}
    rows = list(csv.reader(io.StringIO(path.with_suffix(".csv").read_text())))
    assert rows[0] == ["t", "x0", "u0", "p0", "adjoint_residual", "Hu_violation"]
    for row in rows[1::50]:
        t, p = float(row[0]), float(row[3])
        assert p == pytest.approx(-2 * (1 + R2) * math.exp(-(1 + R2) * t), rel=1e-6, abs=1e-12)
    assert json.loads(path.with_name(path.stem + ".timings.json").read_text())["normality"] > 0


def test_verify_halkin(catalog_runs):
    code, path = catalog_runs["HalkinModified"]
    rep = json.loads(path.read_text())
    assert code == 0
    assert rep["verdict_string"] == "abnormal: lambda0=0"
    assert rep["suites"]["normality"]["witness"]["normal_branch"]["verdict"] == "Fail"


@pytest.mark.parametrize("eid", entry_ids())
def test_catalog_runs_match_expected(catalog_runs, eid):
    code, path = catalog_runs[eid]
    rep = json.loads(path.read_text())
    assert rep["matches_expected"] is True
    assert code == build(eid).expected["exit"]


def linear_config(tmp_path: Path, with_reference=True, optimal=True) -> str:
    # x' = -x + u, discounted cost e^{-2t}(x^2 + u^2)/2: u* = -K x* with K^2 + 4K - 1 = 0
    K = math.sqrt(5.0) - 2.0 if optimal else 0.0
    ref = tmp_path / "ref.csv"
    t = np.linspace(0, 20, 401)
    x = np.exp(-(1.0 + K) * t)
    lines = ["t,x0,u0"] + [f"{float(s)!r},{float(v)!r},{float(-K * v)!r}" for s, v in zip(t, x)]
    ref.write_text("\n".join(lines) + "\n")
    text = f"""
problem:
  external: linear
  A: [["-1"]]
  B: [["1"]]
  Q: [["1"]]
  R: [["1"]]
  x0: ["1"]
  {"reference: ref.csv" if with_reference else ""}
{exp_weights("1.5")}
suites: [normality]
"""
    return write(tmp_path / "linear.yaml", text)


def test_external_linear_problem(tmp_path):
    cfg = linear_config(tmp_path)
    out = tmp_path / "out"
    code = cli.main(["verify", "--config", cfg, "--out", str(out)])
    rep = json.loads(next(p for p in out.glob("external-*.json") if "timings" not in p.name).read_text())
    assert rep["branch"] == "normal" and rep["lambda0"] == 1.0
    assert code == rep["exit_code"] == 0
    assert rep["suites"]["normality"]["conditions"]["VariationalInequality"]["verdict"] == "Pass"


def test_external_suboptimal_reference_fails(tmp_path):
    cfg = linear_config(tmp_path, optimal=False)
    assert cli.main(["verify", "--config", cfg, "--out", str(tmp_path / "out")]) == 1


def test_external_without_reference_exits_two(tmp_path):
    assert cli.main(["verify", "--config", linear_config(tmp_path, False), "--out", str(tmp_path)]) == 2


def test_determinism(tmp_path):
    cfg = write(tmp_path / "c.yaml", "problem: RegulatorB1\nsuites: [growth]\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["verify", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["verify", "--config", cfg, "--out", str(b)]) == 0
    for f in a.glob("*.json"):
        if not f.name.endswith(".timings.json"):
            assert f.read_bytes() == (b / f.name).read_bytes()
    for f in a.glob("*.csv"):
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_output_dir_precedence(tmp_path, monkeypatch):
    cfg = write(tmp_path / "c.yaml", f"problem: RegulatorB1\nsuites: [growth]\noutput_dir: {tmp_path / 'cfg'}\n")
    monkeypatch.chdir(tmp_path)
    assert cli.main(["verify", "--config", cfg]) == 0
    assert list((tmp_path / "cfg").glob("*.json"))
    monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "env"))
    assert cli.main(["verify", "--config", cfg]) == 0
    assert list((tmp_path / "env").glob("*.json"))
    assert cli.main(["verify", "--config", cfg, "--out", str(tmp_path / "flag")]) == 0
    assert list((tmp_path / "flag").glob("*.json"))


def test_flags_override_config(tmp_path):
    cfg = write(tmp_path / "c.yaml", "problem: RegulatorB1\nsuites: [normality]\n")
    out = tmp_path / "o"
    assert cli.main(["verify", "--config", cfg, "--out", str(out), "--suite", "growth",
                     "--horizon", "12", "--tol", "1e-9", "--seed", "4"]) == 0
    rep = json.loads(next(p for p in out.glob("*.json") if "timings" not in p.name).read_text())
    assert list(rep["suites"]) == ["growth"]
    assert rep["horizon"] == 12.0 and rep["config"]["seed"] == 4
    assert rep["config"]["tolerances"]["adjoint"] == "1E-9"


# report

def test_report_rows_and_dedupe(catalog_runs, tmp_path, capsys):
    paths = [str(p) for _, p in catalog_runs.values()]
    dup = tmp_path / "copy.json"
    shutil.copy(paths[0], dup)
    assert cli.main(["report", "--out", str(tmp_path), *paths, str(dup)]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == len(entry_ids())
    assert all(r["matches_expected"] == "True" for r in rows)
    by_name = {r["problem"]: r for r in rows}
    assert by_name["HalkinModified"]["branch"] == "abnormal"
    assert (tmp_path / "summary.csv").exists()


def test_report_errors(tmp_path):
    assert cli.main(["report"]) == 2
    bad = write(tmp_path / "bad.json", "{not json")
    assert cli.main(["report", bad]) == 2
