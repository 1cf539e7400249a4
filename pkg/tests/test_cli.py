import csv
import io
import json
import subprocess
import sys

import jsonschema
import pytest

from fefflab import SCHEMA_ID
from fefflab.cli import dispatch, main, report_schema

SCHEMA = report_schema()


def run(*argv):
    code, text = dispatch(list(argv))
    return code, text


def report(*argv):
    code, text = run(*argv)
    data = json.loads(text)
    jsonschema.validate(data, SCHEMA)
    return code, data


def test_schema_is_valid_draft7():
    jsonschema.Draft7Validator.check_schema(SCHEMA)
    code, text = run("schema")
    assert code == 0 and json.loads(text)["$id"] == SCHEMA_ID


def test_measure_sphere():
    code, data = report("measure", "--surface", "sphere", "--n", "16")
    assert code == 0 and data["status"] == "ok"
    m = data["results"]["measure"]
    assert m["quotient"] == pytest.approx(25.132741228718345, rel=1e-10)
    assert data["params"]["radius"] == 1.0 and data["params"]["no_refine"] is False


@pytest.mark.parametrize("argv", [
    ("kappa", "--surface", "sphere", "--points", "2"),
    ("kappa", "--surface", "heisenberg", "--points", "2"),
    ("sphere-secondvar", "--mode", "B", "--j", "2", "--k", "2"),
    ("ball-caps", "--R", "0.5", "--theta", "1.0"),
    ("ball-caps", "--edge", "R0", "--value", "1.9473"),
    ("shear", "--phi", "one"),
    ("tube", "--curve", "ellipse"),
    ("hl", "--random", "3"),
    ("jl", "--random", "3"),
    ("qstar", "--family", "unitary", "--n", "12"),
    ("validate-quadrature", "--n", "24", "--max-degree", "3"),
])
def test_commands_pass(argv):
    code, data = report(*argv)
    assert code == 0, data["checks"]
    assert data["command"] == argv[0]


def test_deterministic_output(monkeypatch):
    argv = ["kappa", "--surface", "sphere", "--points", "3", "--seed", "4"]
    monkeypatch.setenv("FEFFLAB_THREADS", "1")
    a = run(*argv)[1]
    monkeypatch.setenv("FEFFLAB_THREADS", "4")
    b = run(*argv)[1]
    assert a == b


def test_contract_violation_exit_code():
    # the commonly quoted Heisenberg closed forms fail their checks
    code, data = report("heisenberg", "--amplitude", "0.3", "--n", "32")
    assert code == 2 and data["status"] == "contract-violation"
    assert any(not c["passed"] for c in data["checks"])


def test_not_pseudoconvex_is_contract_failure():
    code, data = report("measure", "--surface", "poly", "--eps", "3.0", "--no-refine")
    assert code == 2 and "error" in data["results"]


def test_usage_errors():
    assert run("measure", "--bogus")[0] == 1
    assert run("nonsense")[0] == 1
    assert run("measure", "--surface", "poly", "--poly", "z^^2")[0] == 1


def test_sweep_is_csv():
    code, text = run("ball-caps", "--sweep", "--nR", "3", "--ntheta", "2")
    rows = list(csv.reader(io.StringIO(text)))
    assert code == 0 and rows[0] == ["R", "theta", "q"] and len(rows) == 7


def test_main_writes_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["--out", str(out), "tube", "--curve", "circle"]) == 0
    assert json.loads(out.read_text())["results"]
    assert capsys.readouterr().out == ""


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fefflab", "schema"], capture_output=True, text=True)
    assert proc.returncode == 0 and SCHEMA_ID in proc.stdout
