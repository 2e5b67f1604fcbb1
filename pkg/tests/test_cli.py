import csv
import io
import json
import subprocess
import sys

import pytest

from recede import fixtures
from recede.cli import run_command


@pytest.fixture(scope="module")
def probs(tmp_path_factory):
    d = tmp_path_factory.mktemp("problems")
    for name, doc in fixtures.PROBLEMS.items():
        (d / f"{name}.json").write_text(json.dumps(doc), encoding="utf-8")
    return d


def run(capsys, *argv):
    code = run_command([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_cone(capsys, probs):
    code, out, _ = run(capsys, "cone", probs / "strip.json")
    assert code == 0
    rep = json.loads(out)
    assert rep["cone"]["kind"] == "polyhedral"


def test_asymfn_plain_and_q(capsys, probs):
    code, out, _ = run(capsys, "asymfn", probs / "strip.json", "--dir", "0,1")
    assert code == 0
    rep = json.loads(out)
    assert rep["value"] == "inf" and rep["kind"] == "plain"
    code, out, _ = run(capsys, "asymfn", probs / "sqrt_abs.json", "--dir", "1", "--kind", "q")
    rep = json.loads(out)
    assert rep["value"] == "inf" and rep["divergence_flag"] is True
    code, out, _ = run(capsys, "asymfn", probs / "rational_squash.json", "--dir", "1",
                       "--kind", "sublevel", "--lambda", "0.5")
    assert code == 0 and json.loads(out)["lambda"] == 0.5


def test_check_exit_codes(capsys, probs):
    code, out, _ = run(capsys, "check", probs / "strip.json")
    assert code == 0
    assert json.loads(out)["verdict"] == "holds"
    code, out, _ = run(capsys, "check", probs / "sqrt_abs.json")
    assert code == 2
    assert json.loads(out)["verdict"] == "violated"
    code, out, _ = run(capsys, "check", probs / "sqrt_abs.json", "--kind", "q")
    assert code == 0


def test_infinity_exit_code_follows_normal_cone_condition(capsys, probs):
    code, out, _ = run(capsys, "infinity", probs / "strip.json")
    assert code == 2
    rep = json.loads(out)
    assert rep["recession_condition"]["verdict"] == "holds"
    assert rep["normal_cone_condition"]["verdict"] == "violated"
    code, _, _ = run(capsys, "infinity", probs / "affine_halfline.json")
    assert code == 0


def test_solve(capsys, probs):
    code, out, _ = run(capsys, "solve", probs / "strip.json")
    rep = json.loads(out)
    assert code == 0 and rep["status"] == "optimal"
    assert sorted(map(tuple, rep["sol_points"])) == [(0.0, 0.0), (1.0, 0.0)]
    code, out, _ = run(capsys, "solve", probs / "strip.json", "--method", "multistart")
    assert json.loads(out)["method"] == "multistart"


def test_stability_csv_and_json(capsys, probs):
    code, out, _ = run(capsys, "stability", probs / "strip.json", "--rings", "2", "--rays", "4")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["u_1", "u_2", "norm_u", "status", "mu", "sol_points", "excess", "deficiency"]
    assert len(rows) == 1 + 2 * 4 + 1
    json.loads(rows[1][5])
    code, out, _ = run(capsys, "stability", probs / "strip.json", "--rings", "2", "--rays", "4",
                       "--format", "json")
    rep = json.loads(out)
    assert len(rep["records"]) == 9 and rep["diagnostics"]["lsc"] == "fail"


def test_sharp_with_profile(capsys, probs, tmp_path):
    prof = tmp_path / "profile.csv"
    code, out, _ = run(capsys, "sharp", probs / "strip.json", "--R", "3", "--profile-csv", prof)
    rep = json.loads(out)
    assert code == 0 and rep["verdict"] == "sharp"
    assert 2.7 <= rep["c_emp"] <= 2.9
    lines = prof.read_text().splitlines()
    assert lines[0] == "R,c_emp" and len(lines) == 1 + 5


def test_out_flag_writes_file(capsys, probs, tmp_path):
    dest = tmp_path / "rep.json"
    code, out, _ = run(capsys, "check", probs / "strip.json", "--out", dest)
    assert code == 0 and out == ""
    assert json.loads(dest.read_text())["verdict"] == "holds"


@pytest.mark.parametrize("argv", [
    ("check", "strip.json"),
    ("asymfn", "rational_squash.json", "--dir", "1", "--kind", "q"),
    ("solve", "plus_sqrt.json"),
    ("stability", "plus_sqrt.json", "--rings", "2", "--rays", "2"),
    ("sharp", "sqrt_abs.json", "--R", "4", "--samples", "5000"),
])
def test_byte_identical_reruns(capsys, probs, argv):
    args = [argv[0], probs / argv[1], *argv[2:]]
    first = run(capsys, *args)
    second = run(capsys, *args)
    assert first == second
    assert first[1]


def test_usage_errors(capsys, probs, monkeypatch):
    assert run(capsys, "bogus")[0] == 1
    assert run(capsys, "check")[0] == 1
    assert run(capsys, "asymfn", probs / "strip.json")[0] == 1
    assert run(capsys, "asymfn", probs / "strip.json", "--dir", "a,b")[0] == 1
    assert run(capsys, "check", probs / "strip.json", "--kind", "sublevel")[0] == 1
    assert run(capsys, "sharp", probs / "strip.json")[0] == 1
    assert run(capsys, "check", probs / "missing.json")[0] == 1
    monkeypatch.setenv("RECEDE_THREADS", "zero")
    code, _, err = run(capsys, "check", probs / "strip.json")
    assert code == 1 and "RECEDE_THREADS" in err


def test_parse_error_exits_1(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dimension": 1, "function": {"kind": "nope"}, "set": {"kind": "whole_space"}}')
    code, _, err = run(capsys, "check", bad)
    assert code == 1 and "ParseError" in err


def test_module_entry_point(probs):
    r = subprocess.run([sys.executable, "-m", "recede", "check", str(probs / "strip.json")],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["mode"] == "exact"
