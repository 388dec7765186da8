from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import pytest

from logbranch import mean_T0, model_from_dict
from logbranch.cli import run

GOLDEN = Path(__file__).parent / "golden"

FELLER = {"b": 0.0, "gamma2": 1.0, "sigma": 1.0, "c": 1.0, "levy": {"family": "none"}}
LINEAR = {"b": 1.0, "gamma2": 0.0, "sigma": 1.0, "c": 1.0, "levy": {"family": "none"}}
# psi(z) = z^{1.01}: the Grey exponent sits inside the indeterminate band
GREY_BAND = {"b": -1.004103922208224, "gamma2": 0.0, "sigma": 1.0, "c": 1.0,
             "levy": {"family": "stable", "alpha": 1.01, "c_alpha": 1.0}}


@pytest.fixture
def model_file(tmp_path):
    def make(doc, name="model.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)

    return make


def invoke(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def shape(doc):
    """Structure of a JSON document: key sets and value kinds, without values."""
    if isinstance(doc, dict):
        return {k: shape(v) for k, v in sorted(doc.items())}
    if isinstance(doc, list):
        return [shape(doc[0])] if doc else []
    if isinstance(doc, bool):
        return "bool"
    if isinstance(doc, (int, float)):
        return "number"
    if doc in ("inf", "-inf", "nan"):
        return "number"
    return "string"


def check_golden(name, doc):
    path = GOLDEN / f"{name}.json"
    assert path.exists(), f"missing golden file {path}"
    assert shape(doc) == json.loads(path.read_text())


def test_analyze_round_trip(model_file):
    code, out, _ = invoke("analyze", "--model", model_file(FELLER), "--echo-model")
    assert code == 0
    doc = json.loads(out)
    check_golden("analyze", {k: v for k, v in doc.items() if k != "report"} | {"report": {
        k: v for k, v in doc["report"].items() if k != "diagnostics"}})
    assert model_from_dict(doc["model"]) == model_from_dict(FELLER)


def test_analyze_undecidable_exit_code(model_file):
    code, out, _ = invoke("analyze", "--model", model_file(GREY_BAND))
    assert code == 2
    assert "undecidable" in out


def test_mean_extinction_passthrough(model_file):
    code, out, _ = invoke("mean-extinction", "--model", model_file(FELLER), "--x", "1")
    assert code == 0
    doc = json.loads(out)
    check_golden("mean_extinction", doc)
    assert doc["value"] == pytest.approx(mean_T0(model_from_dict(FELLER), 1.0), rel=1e-12)


def test_mean_extinction_grid_csv(model_file):
    code, out, _ = invoke("mean-extinction", "--model", model_file(FELLER), "--grid", "0.5,1,inf", "--csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["x", "value"]
    assert [float(r[0]) for r in rows[1:]] == [0.5, 1.0, math.inf]


def test_laplace_T_and_dump(model_file, tmp_path):
    dump = tmp_path / "ric.csv"
    code, out, _ = invoke("laplace-T", "--model", model_file(FELLER), "--lambda", "1", "--x", "1", "--a", "0",
                          "--dump-riccati", str(dump))
    assert code == 0
    doc = json.loads(out)
    check_golden("laplace_T", doc)
    assert 0 < doc["value"] < 1
    rows = list(csv.reader(dump.open()))
    assert rows[0] == ["z", "y", "cumulative"] and len(rows) > 100


def test_laplace_T_infinite_start(model_file):
    code, out, _ = invoke("laplace-T", "--model", model_file(FELLER), "--lambda", "1", "--x", "inf", "--a", "1")
    assert code == 0 and 0 < json.loads(out)["value"] < 1


def test_laplace_nu_csv(model_file):
    code, out, _ = invoke("laplace", "--model", model_file(LINEAR), "--what", "nu", "--lambda", "0,1,2", "--csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))[1:]
    for lam, val in rows:
        assert float(val) == pytest.approx((1 + float(lam) / 2) ** -2, rel=1e-8)


def test_laplace_totalpop(model_file):
    code, out, _ = invoke("laplace", "--model", model_file(LINEAR), "--what", "totalpop", "--lambda", "1")
    assert code == 0
    check_golden("laplace", json.loads(out))


def test_scale_and_hitprob(model_file):
    path = model_file({**FELLER, "b": 0.0, "g": {"kind": "linear", "w": 0.0}})
    code, out, _ = invoke("scale", "--model", path, "--x", "0.5,2")
    assert code == 0
    doc = json.loads(out)
    check_golden("scale", doc)
    assert doc["rows"][1][1] == pytest.approx(2.0, rel=1e-10)
    code, out, _ = invoke("hitprob", "--model", path, "--x", "1", "--y", "4")
    assert code == 0
    doc = json.loads(out)
    check_golden("hitprob", doc)
    assert doc["value"] == pytest.approx(0.75, rel=1e-12)


def test_laplace_T_diff(model_file):
    code, out, _ = invoke("laplace-T-diff", "--model", model_file(FELLER), "--lambda", "1", "--x", "1", "--a", "0")
    assert code == 0
    doc = json.loads(out)
    check_golden("laplace_T_diff", doc)
    code2, out2, _ = invoke("laplace-T", "--model", model_file(FELLER, "m2.json"), "--lambda", "1", "--x", "1")
    assert doc["value"] == pytest.approx(json.loads(out2)["value"], rel=1e-3)


def test_simulate_json_and_per_path(model_file, tmp_path):
    per = tmp_path / "paths.csv"
    code, out, _ = invoke("simulate", "--model", model_file(FELLER), "--paths", "500", "--seed", "3",
                          "--per-path", str(per))
    assert code == 0
    doc = json.loads(out)
    check_golden("simulate", doc)
    rows = list(csv.reader(per.open()))
    assert len(rows) == 501


def test_validate_reference_run(model_file):
    code, out, _ = invoke("validate", "--model", model_file(FELLER), "--x", "1", "--a", "0", "--lambda", "1",
                          "--paths", "100000", "--seed", "7")
    doc = json.loads(out)
    check_golden("validate", doc)
    assert code == 0
    assert abs(doc["z_score"]) < 3


def test_usage_errors(model_file):
    assert invoke("nonsense")[0] == 1
    assert invoke("analyze")[0] == 1
    assert invoke("analyze", "--model", "/nonexistent.json")[0] == 1
    assert invoke("analyze", "--model", model_file({**FELLER, "bogus": 1}))[0] == 1
    assert invoke("laplace-T", "--model", model_file(FELLER), "--lambda", "1", "--x", "0.5", "--a", "1")[0] == 1


def test_numeric_failure_exit_code(model_file):
    # h(0) is infinite when Grey's condition fails, so the ratio to a = 0 cannot be formed
    path = model_file({"b": -1.0, "gamma2": 0.0, "sigma": 1.0, "c": 1.0, "levy": {"family": "none"}})
    assert invoke("laplace-T", "--model", path, "--lambda", "1", "--x", "1", "--a", "0")[0] == 3
