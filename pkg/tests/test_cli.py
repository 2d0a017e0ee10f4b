import csv
import json
import math

import numpy as np
import pytest

from dualbilliards.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_builtin(capsys):
    code, out, _ = run(capsys, "validate", "--curve", "builtin:ellipse")
    rep = json.loads(out)
    assert code == 0 and rep["valid"] and rep["schema"] == 1


def test_validate_nonclosing(tmp_path, capsys):
    f = tmp_path / "bad.json"
    f.write_text(json.dumps({"name": "bad", "p0": 1.0, "q0": 0.0,
                             "pieces": [{"start": 0.0, "end": 2 * math.pi, "kind": "trig",
                                         "coeffs": [1.0, 0.1, 0.0]}]}))
    code, out, err = run(capsys, "validate", "--curve", str(f))
    assert code == 3
    assert json.loads(out)["closure_defect"] == pytest.approx(0.1 * math.pi, rel=1e-10)
    assert json.loads(err)["error"] == "InvalidCurve"


def test_validate_toml(tmp_path, capsys):
    f = tmp_path / "c.toml"
    f.write_text('name = "c"\np0 = 1.0\nq0 = 0.0\n[[pieces]]\nstart = 0.0\nend = 6.283185307179586\n'
                 'kind = "const"\ncoeffs = [1.0]\n')
    code, out, _ = run(capsys, "validate", "--curve", str(f))
    assert code == 0


def test_unknown_builtin(capsys):
    code, _, err = run(capsys, "orbit", "--curve", "builtin:nope", "--x0", "0", "--gamma0", "1")
    assert code == 2
    assert json.loads(err)["error"] == "InvalidProfile"


def test_orbit_csv_and_plot(tmp_path, capsys):
    out = tmp_path / "o.csv"
    png = tmp_path / "o.png"
    code, _, _ = run(capsys, "orbit", "--curve", "builtin:circle", "--x0", "0.1", "--gamma0", "0.5",
                     "--iters", "50", "--out", str(out), "--plot", str(png))
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 51
    g = np.array([float(r["gamma"]) for r in rows])
    assert np.ptp(g) < 1e-12
    assert max(float(r["residual"]) for r in rows) < 1e-9
    assert png.stat().st_size > 0


def test_periodic(capsys):
    code, out, _ = run(capsys, "periodic", "--curve", "builtin:circle", "--p", "1", "--q", "3")
    rep = json.loads(out)
    assert code == 0
    assert rep["action"] == pytest.approx(3 * math.sqrt(3) - math.pi, abs=1e-9)
    assert np.allclose(rep["gamma"], 1.5, atol=1e-9)


def test_rotation(capsys):
    code, out, _ = run(capsys, "rotation", "--curve", "builtin:circle", "--x0", "0", "--gamma0", "2",
                       "--iters", "200")
    assert json.loads(out)["rotation"] == pytest.approx(math.atan(2) / math.pi, abs=1e-12)


def test_ckam_scan(tmp_path, capsys):
    png = tmp_path / "c.png"
    code, out, _ = run(capsys, "--threads", "1", "ckam-scan", "--curve", "builtin:flatpoint", "--j-start", "-0.2",
                       "--j-end", "0.2", "--gamma-max", "0.05", "--grid", "17x16", "--plot", str(png))
    rep = json.loads(out)
    assert code == 0 and rep["band"] > 0 and not rep["certificate_empty"]
    assert png.exists()


def test_bad_grid(capsys):
    with pytest.raises(SystemExit):
        main(["ckam-scan", "--curve", "builtin:circle", "--gamma-max", "1", "--grid", "17by16"])


def test_envelope(tmp_path, capsys):
    out = tmp_path / "e.json"
    code, _, _ = run(capsys, "envelope", "--inner", "builtin:circle", "--area", "0.3", "--samples", "512",
                     "--iters", "5", "--points", "16", "--out", str(out))
    rep = json.loads(out.read_text())
    assert code == 0 and rep["invariance_defect"] < 1e-6


def test_crash_strict_fails(capsys):
    code, _, err = run(capsys, "crash", "--window", "40")
    assert code == 2
    assert json.loads(err)["error"] == "SandwichFailed"


def test_crash_lenient(tmp_path, capsys):
    png = tmp_path / "cr.png"
    code, out, _ = run(capsys, "crash", "--lenient", "--c", "0.9", "--sign", "abs", "--window", "40",
                       "--plot", str(png))
    rep = json.loads(out)
    assert code == 0 and rep["residual"] < 1e-10 and rep["gamma_ratio"] < 1
    assert png.exists()


def test_crash_invalid_params(capsys):
    code, _, err = run(capsys, "crash", "--c", "0.5")
    assert code == 2 and json.loads(err)["error"] == "InvalidParams"


def test_impact_compare(capsys):
    code, out, _ = run(capsys, "--seed", "3", "impact-compare", "--curve", "builtin:ellipse", "--grid", "6x5",
                       "--pairs", "20")
    rep = json.loads(out)
    assert code == 0 and rep["max_deviation"] < 1e-8 and rep["action_identity_max"] < 1e-8


def test_caustic_with_points(tmp_path, capsys):
    ang = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    f = tmp_path / "pts.json"
    f.write_text(json.dumps({"points": (0.5 * np.stack([np.cos(ang), np.sin(ang)], axis=1)).tolist()}))
    code, out, _ = run(capsys, "caustic", "--table", "builtin:circle", "--caustic", str(f), "--samples", "32",
                       "--bounces", "20")
    rep = json.loads(out)
    assert code == 0 and rep["string_spread"] < 1e-8 and rep["tangency_max_defect"] < 1e-6


def test_caustic_with_curve(tmp_path, capsys):
    from dualbilliards.curve import ellipse_curve, save_curve
    f = tmp_path / "c.json"
    save_curve(ellipse_curve(math.sqrt(3.5), math.sqrt(0.5)), f)
    code, out, _ = run(capsys, "caustic", "--table", "builtin:ellipse", "--caustic", str(f), "--samples", "32",
                       "--bounces", "20")
    assert code == 0 and json.loads(out)["string_spread"] < 1e-8


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "dualbilliards", "validate", "--curve", "builtin:circle"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["valid"]
