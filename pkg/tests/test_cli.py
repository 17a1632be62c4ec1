import json
import subprocess
import sys

import numpy as np
import pytest

from g2moduli.cli import EXIT_FAIL, EXIT_INPUT, EXIT_PASS, InputError, main, parse_form_file, write_form_file
from g2moduli.exterior7 import KForm
from g2moduli.g2core import PHI0
from g2moduli.torus_moduli import coperiods, point_from_phi


def run(argv, env=None, capsys=None):
    code = main(argv, env or {})
    out = capsys.readouterr() if capsys else None
    return code, out


def test_parse_form_file_phi0(tmp_path):
    f = tmp_path / "phi.json"
    f.write_text(json.dumps(PHI0.to_dict()))
    assert parse_form_file(f).allclose(PHI0, rtol=0, atol=0)


def test_parse_form_file_wrong_count(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text(json.dumps({"degree": 3, "coeffs": [0.0] * 34}))
    with pytest.raises(InputError):
        parse_form_file(f)


def test_parse_form_file_malformed(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text("{not json")
    with pytest.raises(InputError):
        parse_form_file(f)


def test_form_file_round_trip_bytes(tmp_path):
    rng = np.random.default_rng(0)
    a = KForm(3, rng.normal(size=35))
    f1, f2 = tmp_path / "a.json", tmp_path / "b.json"
    write_form_file(f1, a)
    b = parse_form_file(f1)
    write_form_file(f2, b)
    assert np.array_equal(a.coeffs, b.coeffs)
    assert f1.read_bytes() == f2.read_bytes()
    M = rng.normal(size=(7, 7))
    write_form_file(f1, M)
    assert np.array_equal(parse_form_file(f1), M)


def test_metric_subcommand(capsys):
    code, out = run(["metric", "--samples", "3"], capsys=capsys)
    assert code == EXIT_PASS
    rep = json.loads(out.out)
    assert rep["schema"] == "g2moduli.report/1" and rep["status"] == "pass"
    names = [c["name"] for c in rep["checks"]]
    assert names == sorted(names)
    assert set(rep["checks"][0]) == {"name", "measured", "expected", "tolerance", "pass"}
    assert "suite metric" in out.err


def test_over_tight_tolerance_fails(capsys):
    code, out = run(["star", "--samples", "2", "--tol.all", "1e-15"], capsys=capsys)
    assert code == EXIT_FAIL
    assert json.loads(out.out)["status"] == "fail"


def test_single_tolerance_flag_forms(capsys):
    assert run(["decompose", "--samples", "2", "--tol.decompose.reconstruction=0"], capsys=capsys)[0] == EXIT_FAIL
    assert run(["decompose", "--samples", "2", "--tol.decompose.reconstruction", "1"], capsys=capsys)[0] == EXIT_PASS


def test_environment_mirrors_flags(capsys):
    env = {"G2MODULI_SAMPLES": "2", "G2MODULI_TOL_DECOMPOSE_RECONSTRUCTION": "0"}
    assert run(["decompose"], env, capsys)[0] == EXIT_FAIL
    # flag wins over environment
    assert run(["decompose", "--tol.decompose.reconstruction", "1"], env, capsys)[0] == EXIT_PASS


@pytest.mark.parametrize("argv", [
    ["metric", "--bogus"],
    ["nosuch"],
    ["metric", "--tol.nope", "1"],
    ["metric", "--tol.all", "-1"],
    ["metric", "--seed", "x"],
    ["metric", "--samples", "0"],
    ["metric", "--input", "/nonexistent/file.json"],
])
def test_input_errors(argv, capsys):
    assert run(argv, capsys=capsys)[0] == EXIT_INPUT


def test_unknown_env_tolerance(capsys):
    assert run(["metric"], {"G2MODULI_TOL_NOPE": "1"}, capsys)[0] == EXIT_INPUT


def test_bad_form_input(tmp_path, capsys):
    f = tmp_path / "x.json"
    f.write_text(json.dumps({"degree": 3, "coeffs": [0.0] * 34}))
    code, out = run(["metric", "--input", str(f)], capsys=capsys)
    assert code == EXIT_INPUT and "35 coefficients" in out.err


def test_nondefinite_input_is_input_error(tmp_path, capsys):
    f = tmp_path / "x.json"
    f.write_text(json.dumps(KForm.zero(3).to_dict()))
    assert run(["metric", "--input", str(f)], capsys=capsys)[0] == EXIT_INPUT


def test_output_file_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["periods", "--seed", "5", "--samples", "3", "--output", str(a)], capsys=capsys)[0] == EXIT_PASS
    assert run(["periods", "--seed", "5", "--samples", "3", "--output", str(b)], capsys=capsys)[0] == EXIT_PASS
    assert a.read_bytes() == b.read_bytes()


def test_morse_beta_from_file(tmp_path, capsys):
    beta = coperiods(point_from_phi(PHI0).structure)
    f = tmp_path / "beta.json"
    f.write_text(json.dumps({"beta": (2 * beta).tolist()}))
    code, out = run(["morse", "--input", str(f)], capsys=capsys)
    rep = json.loads(out.out)
    assert code == EXIT_PASS
    assert rep["data"]["c"] == pytest.approx(2.0)
    assert rep["data"]["eigenvalues"][0] == pytest.approx(-2.0, abs=1e-4)


def test_morse_infeasible_beta(tmp_path, capsys):
    beta = coperiods(point_from_phi(PHI0).structure)
    i = int(np.argmax(np.abs(beta)))
    beta[i] = -beta[i]
    f = tmp_path / "beta.json"
    f.write_text(json.dumps({"beta": beta.tolist()}))
    code, out = run(["morse", "--input", str(f)], capsys=capsys)
    assert code == EXIT_FAIL
    rep = json.loads(out.out)
    assert any("find_critical" in n for n in rep["notes"])


def test_affine_quadric_and_csv(tmp_path, capsys):
    spec = tmp_path / "patch.json"
    spec.write_text(json.dumps({"patch": {"kind": "quadric", "type": "paraboloid"}}))
    csv_path = tmp_path / "rows.csv"
    code, out = run(["affine", "--input", str(spec), "--samples", "3", "--csv", str(csv_path)], capsys=capsys)
    assert code == EXIT_PASS  # verdict false is the expected outcome for a paraboloid
    assert json.loads(out.out)["data"]["is_sphere"] is False
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "u,H,angle,det_p" and len(lines) == 4


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "g2moduli.cli", "metric", "--samples", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["suite"] == "metric"
