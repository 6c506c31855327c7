import json
import subprocess
import sys

import pytest

from measqc.cli import main

CIRCUIT = {"num_qubits": 2, "gates": [{"name": "H", "targets": [0]}, {"name": "T", "targets": [0]},
                                      {"name": "CNOT", "targets": [0, 1]}]}
SU_ARGS = ["--theta", "0.19634954084936207", "--phi", "0.7853981633974483"]


@pytest.fixture
def circuit_file(tmp_path):
    p = tmp_path / "circuit.json"
    p.write_text(json.dumps(CIRCUIT))
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def as_float(s):
    return float(s)


# --- exit codes -----------------------------------------------------------------


def test_usage_errors(capsys, tmp_path, circuit_file):
    assert run(capsys, "stats", "--trials", "1")[0] == 2
    assert run(capsys, "verify", circuit_file, "--trials", "0")[0] == 2
    assert run(capsys, "verify", circuit_file, "--tol", "-1")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "run")[0] == 2
    assert run(capsys, "verify", str(tmp_path / "missing.json"))[0] == 2


def test_bad_json_is_a_parse_error(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "compile", str(bad))
    assert code == 2 and "not JSON" in err


def test_default_special_u_is_unsupported_in_single_mode(capsys, circuit_file):
    code, _, err = run(capsys, "compile", circuit_file, "--mode", "single-measurement")
    assert code == 3 and err.startswith("unsupported")


def test_general_two_qubit_gate_is_unsupported_in_two_qubit_modes(capsys, tmp_path):
    eye = [[["1", "0"] if i == j else ["0", "0"] for j in range(4)] for i in range(4)]
    p = tmp_path / "u2.json"
    p.write_text(json.dumps({"num_qubits": 2, "gates": [{"name": "U2", "targets": [0, 1], "matrix": eye}]}))
    assert run(capsys, "compile", str(p))[0] == 3


def test_failed_tolerance_exits_with_statistics_code(capsys, circuit_file):
    code, out, _ = run(capsys, "verify", circuit_file, "--tol", "1e-300", "--trials", "2")
    report = json.loads(out)
    assert report["passed"] == (as_float(report["max_infidelity"]) <= 1e-300)
    assert code == (0 if report["passed"] else 4)


# --- commands ---------------------------------------------------------------------


def test_compile_t_in_four_qubit_mode(capsys, tmp_path):
    p = tmp_path / "t.json"
    p.write_text(json.dumps({"num_qubits": 1, "gates": [{"name": "T", "targets": [0]}]}))
    code, out, err = run(capsys, "compile", str(p), "--mode", "four-qubit")
    assert code == 0 and "high-water mark" in err
    prog = json.loads(out)
    core = [i for i in prog["instructions"] if i.get("tag", "").startswith("core")]
    assert len(core) == 1 and len(core[0]["targets"]) == 4
    assert any(r["type"] == "frame" for r in prog["feedforward"])


def test_compile_then_run_program(capsys, tmp_path, circuit_file):
    out_path = tmp_path / "prog.json"
    assert run(capsys, "compile", circuit_file, "-o", str(out_path), "--frame-policy", "eager")[0] == 0
    code, out, _ = run(capsys, "run", "--program", str(out_path), "--seed", "5")
    report = json.loads(out)
    assert code == 0 and report["residual_frame"] == "+II"


def test_run_reports_fidelity(capsys, circuit_file):
    code, out, _ = run(capsys, "run", circuit_file, "--mode", "four-qubit", "--seed", "2")
    assert code == 0
    assert as_float(json.loads(out)["fidelity_to_circuit"]) == pytest.approx(1.0, abs=1e-10)


def test_same_seed_gives_byte_identical_reports(capsys, circuit_file):
    a = run(capsys, "verify", circuit_file, "--trials", "3", "--seed", "11")[1]
    b = run(capsys, "verify", circuit_file, "--trials", "3", "--seed", "11")[1]
    c = run(capsys, "verify", circuit_file, "--trials", "3", "--seed", "12")[1]
    assert a == b and a != c


def test_verify_single_measurement_mode(capsys, circuit_file):
    code, out, _ = run(capsys, "verify", circuit_file, "--mode", "single-measurement", "--trials", "2", *SU_ARGS)
    assert code == 0 and json.loads(out)["passed"]


def test_verify_with_branches(capsys, tmp_path):
    p = tmp_path / "t.json"
    p.write_text(json.dumps({"num_qubits": 1, "gates": [{"name": "T", "targets": [0]}]}))
    code, out, _ = run(capsys, "verify", str(p), "--mode", "four-qubit", "--trials", "1", "--branches")
    assert code == 0 and json.loads(out)["branches"]


def test_usq(capsys):
    _, out, _ = run(capsys, "usq", "--theta", "0", "--phi", "0")
    assert as_float(json.loads(out)["max_deviation"]) == 0.0
    _, out, _ = run(capsys, "usq", "--theta", "1.0", "--phi", "0.5")
    assert as_float(json.loads(out)["max_deviation"]) < 1e-12


def test_acn_post_selected(capsys):
    code, out, _ = run(capsys, "acn", "--post-select")
    report = json.loads(out)
    assert code == 0
    assert as_float(report["post_selected"]["fidelity"]) == pytest.approx(1.0, abs=1e-12)
    assert all(as_float(b["fidelity"]) == pytest.approx(1.0, abs=1e-12) for b in report["branches"])


def test_acn_sampled(capsys):
    _, out, _ = run(capsys, "acn", "--trials", "200", "--seed", "3")
    report = json.loads(out)
    assert sum(report["branch_counts"].values()) == 200
    assert as_float(report["min_cross_engine_fidelity"]) == pytest.approx(1.0, abs=1e-10)


def test_stats_pauli_gadget(capsys):
    code, out, _ = run(capsys, "stats", "--experiment", "pauli-gadget", "--trials", "2000", "--seed", "1")
    report = json.loads(out)
    assert code == 0 and report["passed"]
    assert as_float(report["bell_measurements_per_gadget"]["expected"]) == 8.0


def test_stats_walk(capsys):
    code, out, _ = run(capsys, "stats", "--experiment", "walk", "--trials", "2000", "--seed", "1")
    report = json.loads(out)
    assert code == 0 and report["passed"]
    assert as_float(report["iterations"]["expected"]) == 16.0


def test_walk_histogram(capsys):
    _, out, _ = run(capsys, "walk", "--trials", "300", "--seed", "2")
    hist = json.loads(out)["histogram"]
    assert sum(hist.values()) == 300 and min(int(k) for k in hist) >= 1


def test_environment_overrides_are_echoed(capsys, circuit_file, monkeypatch):
    monkeypatch.setenv("MEASQC_TOL", "1e-6")
    _, out, _ = run(capsys, "verify", circuit_file, "--trials", "1")
    report = json.loads(out)
    assert report["environment"] == {"MEASQC_TOL": "1e-6"}
    assert as_float(report["tol"]) == 1e-6


def test_console_entry_point(circuit_file):
    proc = subprocess.run([sys.executable, "-m", "measqc.cli", "usq"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "max_deviation" in json.loads(proc.stdout)
