import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pseudoherm.cli import main
from pseudoherm.runner import run_scenario
from pseudoherm.scenario import ValidationError, load_scenario, validate_document

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


GAUSS = {
    "name": "small_gauss",
    "branch": "pseudo",
    "profiles": {"U": "1", "G": "exp(-x^2)"},
    "domain": [-6, 6],
    "grid": 1601,
    "checks": ["eq13", "eq18", "intertwine+", "groundstate"],
}


# --- exit codes --------------------------------------------------------------


def test_passing_scenario_exits_zero(tmp_path, capsys):
    assert main(["verify", "--scenario", _write(tmp_path, GAUSS), "--out", str(tmp_path)]) == 0
    assert "PASS: small_gauss (verify)" in capsys.readouterr().err


def test_failing_check_exits_one(tmp_path, capsys):
    doc = dict(GAUSS, tolerances={"intertwine+": 1e-9})
    assert main(["verify", "--scenario", _write(tmp_path, doc), "--out", str(tmp_path)]) == 1
    report = json.loads((tmp_path / "small_gauss.verify.json").read_text())
    assert report["summary"]["status"] == "fail"
    status = {c["name"]: c["status"] for c in report["checks"]}
    assert status["intertwine+"] == "fail" and status["eq13"] == "pass"


def test_malformed_expression_exits_two_with_offset(capsys):
    code = main(["verify", "--scenario", str(SCENARIOS / "malformed_expression.json")])
    assert code == 2
    err = capsys.readouterr().err
    assert "profiles.G" in err and "byte offset 4" in err


def test_bad_ordering_exits_two(capsys):
    assert main(["construct", "--scenario", str(SCENARIOS / "vonroos_bad_ordering.json")]) == 2
    assert "alpha" in capsys.readouterr().err


@pytest.mark.parametrize("mutation", [
    {"checks": ["eq13", "nonsense"]},
    {"checks": ["eq13", "eq13"]},
    {"grid": [401, 201]},
    {"branch": "quantum"},
    {"domain": [1, -1]},
    {"extra_key": 1},
    {"tolerances": {"eq13": "tight"}},
])
def test_invalid_documents_exit_two(tmp_path, mutation):
    doc = dict(GAUSS, **mutation)
    assert main(["verify", "--scenario", _write(tmp_path, doc)]) == 2


def test_missing_file_and_bad_json(tmp_path):
    assert main(["verify", "--scenario", str(tmp_path / "absent.json")]) == 2
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["verify", "--scenario", str(p)]) == 2


def test_argument_errors_exit_two(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate", "--scenario", "x"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["verify"])
    assert info.value.code == 2


def test_csv_without_directory_is_rejected(tmp_path):
    assert main(["construct", "--scenario", _write(tmp_path, GAUSS), "--format", "csv"]) == 2


def test_command_branch_mismatch(tmp_path):
    assert main(["transform", "--scenario", _write(tmp_path, GAUSS)]) == 2


def test_restricted_requires_restricted_ordering():
    doc = {"name": "v", "branch": "vonroos", "profiles": {"m": "1"},
           "constants": {"alpha": -0.5, "beta": 0, "gamma": -0.5}, "domain": [0, 1],
           "checks": ["restricted"]}
    with pytest.raises(ValidationError):
        validate_document(doc)


def test_unicode_minus_in_check_name_is_accepted():
    doc = {"name": "w", "branch": "weak", "profiles": {"U": "1", "g": "x"},
           "domain": [-2, 2], "checks": ["intertwine−"]}
    assert validate_document(doc).checks == ["intertwine-"]


# --- reports -------------------------------------------------------------------


def test_json_is_byte_identical_without_timings(tmp_path):
    src = str(SCENARIOS / "weak_linear.json")
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert main(["verify", "--scenario", src, "--out", str(d), "--no-timings"]) == 0
        outs.append((d / "weak_linear.verify.json").read_bytes())
    assert outs[0] == outs[1]
    assert b"seconds" not in outs[0]


def test_json_to_stdout(tmp_path, capsys):
    assert main(["construct", "--scenario", _write(tmp_path, GAUSS), "--no-timings"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["command"] == "construct" and doc["artifact"]
    assert set(doc["tables"]) >= {"potential", "partner", "ground_state"}


def test_csv_round_trip(tmp_path):
    src = _write(tmp_path, GAUSS)
    assert main(["construct", "--scenario", src, "--out", str(tmp_path), "--format", "csv"]) == 0
    with open(tmp_path / "small_gauss.potential.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    x = data[:, header.index("x")]
    assert x.size == 1601
    V_re = data[:, header.index("V_re")]
    V_im = data[:, header.index("V_im")]
    # 17 significant digits reproduce the in-memory table exactly.
    table = run_scenario(load_scenario(src), "construct").tables["potential"]
    for name, col in (("x", x), ("V_re", V_re), ("V_im", V_im)):
        ref = np.asarray(table[name], dtype=float)
        assert np.max(np.abs(col - ref)) <= 1e-15 * (1 + np.max(np.abs(ref)))
    want = x**2 - np.exp(-2 * x**2) - 1
    np.testing.assert_allclose(V_re, want, rtol=0, atol=1e-12)
    np.testing.assert_allclose(V_im, 4 * x * np.exp(-x**2), rtol=0, atol=1e-12)
    raw = (tmp_path / "small_gauss.potential.csv").read_bytes()
    assert b"\r\n" not in raw


def test_weak_potential_report(tmp_path, capsys):
    assert main(["construct", "--scenario", str(SCENARIOS / "weak_linear.json"), "--no-timings"]) == 0
    doc = json.loads(capsys.readouterr().out)
    pot = doc["tables"]["potential"]
    assert pot["columns"] == ["x", "V_re", "V_im"]
    x = np.array(pot["data"]["x"])
    np.testing.assert_allclose(pot["data"]["V_re"], -x**2, atol=1e-12)
    np.testing.assert_allclose(pot["data"]["V_im"], -1.0, atol=1e-12)


@pytest.mark.parametrize("name, command", [
    ("gaussian_pseudo", "verify"),
    ("exponential_pseudo", "verify"),
    ("weak_variable_mass", "verify"),
    ("vonroos_box", "spectrum"),
    ("transform_rational", "transform"),
    ("transform_identity", "verify"),
    ("variable_mass_pseudo", "convergence"),
])
def test_shipped_scenarios_pass(name, command, tmp_path):
    assert main([command, "--scenario", str(SCENARIOS / f"{name}.json"), "--out", str(tmp_path)]) == 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "pseudoherm", "verify", "--scenario", _write(tmp_path, GAUSS),
         "--out", str(tmp_path)],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
