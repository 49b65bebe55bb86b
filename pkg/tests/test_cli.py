import json
import math

import numpy as np
import pytest

from isodisc.experiments import ExperimentConfig, main, parse_theta, validation_checks
from isodisc.raster import read_pnm, write_pnm


@pytest.mark.parametrize(
    "text, value",
    [
        ("pi/4", math.pi / 4),
        ("-3pi/4", -3 * math.pi / 4),
        ("2*pi/5", 2 * math.pi / 5),
        ("pi", math.pi),
        ("0.3", 0.3),
    ],
)
def test_parse_theta(text, value):
    assert parse_theta(text) == pytest.approx(value)


def test_parse_theta_rejects_garbage():
    with pytest.raises(ValueError):
        parse_theta("tau/3")


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("tau-curve", kmax=0)
    with pytest.raises(ValueError):
        ExperimentConfig("tau-curve", seed=-1)
    with pytest.raises(ValueError):
        ExperimentConfig("nope")
    with pytest.raises(ValueError):
        ExperimentConfig("tau-single", theta=0.1, pythagorean=(3, 4, 5))


def _rows(path):
    lines = path.read_text().splitlines()
    body = [l for l in lines if not l.startswith("#")]
    return [l for l in lines if l.startswith("#")], body[0], [l.split(",") for l in body[1:]]


def test_tau_curve_identity_single_row(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["tau-curve", "--kmax", "1", "--theta", "0", "--radius", "20", "--out", str(out)]) == 0
    header, cols, rows = _rows(out)
    assert cols == "k,tau_mean,tau_stderr"
    assert rows == [["1", "1.0", "0.0"]]
    assert "# seed=0" in header and "# R=20.0" in header and "# trials=50" in header


def test_tau_curve_byte_identical(tmp_path):
    args = ["tau-curve", "--kmax", "5", "--trials", "3", "--radius", "40", "--seed", "9"]
    a = tmp_path / "a.csv"
    assert main(args + ["--out", str(a)]) == 0
    first = a.read_bytes()
    assert main(args + ["--out", str(a)]) == 0
    assert a.read_bytes() == first
    _, _, rows = _rows(a)
    assert [int(r[0]) for r in rows] == [1, 2, 3, 4, 5]


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["tau-curve", "--theta", "bogus"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["no-such-command"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["tau-single", "--pythagorean", "3,4,6"])
    assert e.value.code == 2


def test_unwritable_output_exit_1(tmp_path, capsys):
    bad = tmp_path / "nope" / "x.csv"
    assert main(["tau-curve", "--kmax", "1", "--theta", "0", "--radius", "5", "--out", str(bad)]) == 1
    assert str(bad) in capsys.readouterr().err


def test_gamma_image_files(tmp_path):
    out = tmp_path / "g.pgm"
    assert main(["gamma-image", "--radius", "40", "--steps", "0,1", "--theta", "pi/4", "--out", str(out)]) == 0
    k0 = read_pnm(tmp_path / "g_k0.pgm")
    k1 = read_pnm(tmp_path / "g_k1.pgm")
    assert k0.shape == (79, 79) and np.all(k0 == 0)
    assert np.mean(k1 == 0) == pytest.approx(0.828, abs=0.02)
    meta = json.loads((tmp_path / "g_k1.json").read_text())
    assert meta["k"] == 1 and meta["config"]["seed"] == 0


def test_gamma_images_whiten(tmp_path):
    out = tmp_path / "w.pgm"
    assert main(["gamma-image", "--radius", "60", "--steps", "2,5,50", "--seed", "1", "--out", str(out)]) == 0
    black = [np.mean(read_pnm(tmp_path / f"w_k{k}.pgm") == 0) for k in (2, 5, 50)]
    assert black[0] > black[1] > black[2]


def test_rotate_image_identity_and_quarter_turns(tmp_path, capsys):
    src = tmp_path / "s.ppm"
    img = np.random.default_rng(1).integers(0, 256, (11, 16, 3)).astype(np.uint8)
    write_pnm(src, img)
    out = tmp_path / "o.ppm"
    assert main(["rotate-image", "--in", str(src), "--out", str(out), "--theta", "0", "--kmax", "1"]) == 0
    np.testing.assert_array_equal(read_pnm(out), img)
    assert main(["rotate-image", "--in", str(src), "--out", str(out), "--theta", "pi/2", "--kmax", "4"]) == 0
    np.testing.assert_array_equal(read_pnm(out), img)
    assert "hole_fraction=0.000000" in capsys.readouterr().out
    assert (tmp_path / "o.json").exists()


def test_rotate_image_degrades(tmp_path, capsys):
    src = tmp_path / "s.pgm"
    write_pnm(src, np.random.default_rng(2).integers(0, 256, (220, 282)).astype(np.uint8))
    assert main(["rotate-image", "--in", str(src), "--out", str(tmp_path / "o.pgm"), "--seed", "4"]) == 0
    line = capsys.readouterr().out
    holes = float(line.split("hole_fraction=")[1].split()[0])
    assert holes > 0.3


def test_rotate_image_malformed_input(tmp_path, capsys):
    src = tmp_path / "bad.pgm"
    src.write_bytes(b"P5\n4 4\n255\n\x00")
    assert main(["rotate-image", "--in", str(src), "--out", str(tmp_path / "o.pgm")]) == 1
    assert "byte" in capsys.readouterr().err


def test_rho_map_and_translations(tmp_path):
    rho = tmp_path / "rho.csv"
    assert main(["rho-map", "--radius", "60", "--vmax", "3", "--theta", "pi/4", "--out", str(rho)]) == 0
    _, cols, rows = _rows(rho)
    assert cols == "v1,v2,rho" and len(rows) == 49
    assert dict(((int(a), int(b)), float(f)) for a, b, f in rows)[(0, 0)] == 1.0
    tr = tmp_path / "t.csv"
    assert main(["translations", "--radius", "120", "--vmax", "10", "--eps", "0.05", "--out", str(tr)]) == 0
    _, cols, rows = _rows(tr)
    assert cols == "v1,v2,defect" and ["0", "0", "0.0"] in rows


def test_tau_single_and_equidistribution(capsys):
    assert main(["tau-single", "--pythagorean", "3,4,5", "--radius", "50"]) == 0
    out = capsys.readouterr().out
    assert "counting,1.0" in out and "residue,1.0" in out
    assert main(["equidistribution", "--pythagorean", "3,4,5", "--radius", "100"]) == 0
    d = float(capsys.readouterr().out.strip().splitlines()[-1])
    assert d > 1.0


def test_validate_quarter_turn_reports_exact_rates():
    cfg = ExperimentConfig("validate", R=60, trials=3, kmax=12, theta=math.pi / 2)
    checks = {c.name.split("[")[0]: c for c in validation_checks(cfg)}
    assert checks["tau_counting"].measured == 1.0 and checks["tau_counting"].passed
    assert checks["tau_geometric"].measured == 1.0 and checks["tau_geometric"].passed
    assert checks["tau_residue"].passed


def test_validate_report_and_status(tmp_path):
    out = tmp_path / "report.txt"
    code = main(["validate", "--radius", "60", "--trials", "3", "--kmax", "12", "--out", str(out)])
    lines = out.read_text().splitlines()
    verdicts = [l for l in lines if l.endswith(("PASS", "FAIL"))]
    assert verdicts
    assert code == (1 if any(l.endswith("FAIL") for l in verdicts) else 0)
