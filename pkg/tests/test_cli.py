import json
import subprocess
import sys

import numpy as np
import pytest

from spikesolve.cli import main, parse_range


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


MU = {"n": 1, "atoms": [{"point": [-0.5], "weight": 0.3}, {"point": [0.1], "weight": 0.3}, {"point": [0.7], "weight": 0.4}]}


def test_parse_range():
    assert parse_range("1..4") == (1, 2, 3, 4)
    assert parse_range("2,5") == (2, 5)


def test_moments_of_dirac(capsys, tmp_path):
    path = _write(tmp_path / "d.json", {"n": 1, "atoms": [{"point": [0.0], "weight": 1.0}]})
    code, out, _ = _run(capsys, "moments", "--measure", path, "--degree", "2")
    assert code == 0 and json.loads(out)["values"] == [1.0, 0.0, 0.0]


def test_moments_of_uniform_density(capsys):
    code, out, _ = _run(capsys, "moments", "--density", "uniform", "--degree", "2")
    assert json.loads(out)["values"] == pytest.approx([2.0, 0.0, 2.0 / 3.0], abs=1e-15)


def test_noisy_moments_are_reproducible(capsys, tmp_path):
    path = _write(tmp_path / "mu.json", MU)
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        assert main(["moments", "--measure", path, "--degree", "4", "--noise", "1e-3", "--seed", "5", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    doc = json.loads(outs[0])
    clean = main(["moments", "--measure", path, "--degree", "4", "--out", str(tmp_path / "c.json")])
    y0 = np.array(json.loads((tmp_path / "c.json").read_text())["values"])
    assert clean == 0
    assert doc["delta"] == pytest.approx(np.linalg.norm(np.array(doc["values"]) - y0))


def test_exact_round_trip(capsys, tmp_path):
    mu_path = _write(tmp_path / "mu.json", MU)
    m_path = tmp_path / "m.json"
    assert main(["moments", "--measure", mu_path, "--degree", "12", "--basis", "orthonormal-uniform-box", "--out", str(m_path)]) == 0
    rec = tmp_path / "rec.json"
    code = main(["recover", str(m_path), "--out", str(rec), "--report", str(tmp_path / "rep.json")])
    assert code == 0
    atoms = json.loads(rec.read_text())["atoms"]
    np.testing.assert_allclose([a["point"][0] for a in atoms], [-0.5, 0.1, 0.7], atol=1e-3)
    np.testing.assert_allclose([a["weight"] for a in atoms], [0.3, 0.3, 0.4], atol=1e-3)
    report = json.loads((tmp_path / "rep.json").read_text())
    assert report["mode"] == "exact" and "H_monomial_coeffs" in report


def test_noisy_mode_reports_level_and_diagnostics(capsys, tmp_path):
    mu = {"n": 1, "atoms": [{"point": [-0.4], "weight": 0.5}, {"point": [0.5], "weight": 0.5}]}
    mu_path = _write(tmp_path / "mu.json", mu)
    m_path = tmp_path / "m.json"
    main(["moments", "--measure", mu_path, "--degree", "6", "--basis", "orthonormal-uniform-box", "--noise", "1e-4", "--out", str(m_path)])
    code, out, _ = _run(capsys, "recover", str(m_path), "--truth", mu_path)
    doc = json.loads(out)
    assert code == 0 and doc["mode"] == "noisy"
    assert doc["level"] == 6 and "alpha" in doc
    assert set(doc["diagnostics"]["bounds"]) >= {"spike_localization", "near_moment", "far_mass", "negative_mass", "certificate"}


def test_recover_rejects_delta_in_exact_mode(capsys, tmp_path):
    path = _write(tmp_path / "m.json", {"n": 1, "degree": 2, "basis": "monomial", "values": [1, 0, 0], "delta": 0.1})
    code, _, err = _run(capsys, "recover", path, "--mode", "exact")
    assert code == 1 and "delta" in err


def test_extraction_failure_exit_code(capsys, tmp_path):
    # Lebesgue moments on the square: no isolated zeros at half-degree 1
    path = _write(tmp_path / "m.json", {"n": 2, "degree": 2, "basis": "orthonormal-uniform-box", "values": [1, 0, 0, 0, 0, 0], "delta": 0.0})
    code, _, err = _run(capsys, "recover", path)
    assert code == 3 and "failed" in err


def test_schema_errors_exit_one(capsys, tmp_path):
    path = _write(tmp_path / "bad.json", {"n": 1, "degree": 2, "basis": "monomial", "values": [1, 0]})
    assert _run(capsys, "recover", path)[0] == 1
    assert _run(capsys, "recover", str(tmp_path / "missing.json"))[0] == 1
    assert _run(capsys, "moments", "--degree", "2")[0] == 1


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["recover"])
    assert exc.value.code == 1


def test_analyze_four_interval_points(capsys, tmp_path):
    path = _write(tmp_path / "p.json", [[0.1], [0.2], [0.5], [0.9]])
    code, out, _ = _run(capsys, "analyze", path)
    assert code == 0 and json.loads(out)["safe_degree"] == 8


def test_analyze_generic_plane_points(capsys, tmp_path):
    pts = np.random.default_rng(0).uniform(size=(10, 2)).tolist()
    code, out, _ = _run(capsys, "analyze", _write(tmp_path / "p.json", {"n": 2, "points": pts}))
    doc = json.loads(out)
    assert doc["generic_bounds"] == {"upper": 8, "lower": 7}


def test_analyze_single_point(capsys, tmp_path):
    code, out, _ = _run(capsys, "analyze", _write(tmp_path / "p.json", [[0.25, 0.5]]))
    doc = json.loads(out)
    assert doc["interpolation_degree"] == 0 and doc["singular_degree"] == 2


def test_duplicate_points_exit_four(capsys, tmp_path):
    code, _, err = _run(capsys, "analyze", _write(tmp_path / "p.json", [[0.1], [0.1]]))
    assert code == 4 and "duplicate" in err


def test_certify_reports_witness(capsys, tmp_path):
    path = _write(tmp_path / "p.json", [[-0.5], [0.5]])
    code, out, _ = _run(capsys, "certify", path)
    doc = json.loads(out)
    assert code == 0 and doc["grid_verified"]
    np.testing.assert_allclose(doc["monomial_coeffs"], [8 / 9, 0, 8 / 9, 0, -16 / 9], atol=1e-10)


def test_summarize_two_nodes(capsys):
    code, out, _ = _run(capsys, "summarize", "--density", "uniform", "--degree", "2", "--k", "2")
    atoms = json.loads(out)["measure"]["atoms"]
    assert code == 0
    np.testing.assert_allclose([a["point"][0] for a in atoms], [-0.57735, 0.57735], atol=1e-5)


def test_experiment_heatmap(capsys, tmp_path):
    code, _, _ = _run(capsys, "--seed", "7", "experiment", "exact-heatmap", "--k", "1..2", "--d", "1..2", "--trials", "2", "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "exact_heatmap_n1.csv").read_text().splitlines()
    assert lines[0] == "k\\d,1,2" and len(lines) == 3


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "spikesolve.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "spikesolve" in proc.stdout
