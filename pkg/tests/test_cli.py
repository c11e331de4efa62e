import json

import numpy as np
import pytest

from hsbmo.calibration import Calibration, save_calibration
from hsbmo.cli import EXIT_CONFIG, EXIT_OK, main
from hsbmo.config import load_config, parse_config
from hsbmo.exceptions import ConfigError
from hsbmo.grid import generate, make_grid
from hsbmo.io import read_field, read_halfspace, sha256_file, write_field

SMALL1 = {"d": 1, "N": 256, "h": 0.0625}


def _write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return p


def test_parse_config_defaults():
    cfg = parse_config({"grid": SMALL1})
    assert cfg.system.name == "laplacian" and cfg.kappa == 1.0
    assert cfg.t_levels()[0] == pytest.approx(SMALL1["h"] / 2)


@pytest.mark.parametrize("doc,needle", [
    ({"grid": {"d": 1, "N": 100, "h": 1}}, "invalid grid"),
    ({"grid": {"d": 1, "N": 64}}, "missing 'h'"),
    ({"grid": SMALL1, "system": {"name": "nope"}}, "unknown system"),
    ({"grid": SMALL1, "system": {"name": "laplacian"}, "kappa": -1}, "kappa"),
    ({"grid": SMALL1, "field": {"generator": "nope"}}, "unknown generator"),
    ({"grid": SMALL1, "operations": [{"op": "nope"}]}, "unknown operation"),
    ({"grid": SMALL1, "operations": [{"op": "holder_seminorm", "eta": 0.5}]}, "seed is required"),
    ({"grid": SMALL1, "ladder": [1.0, 0.5]}, "ladder"),
    ({"grid": SMALL1, "seed": -3}, "unsigned"),
    ({"grid": SMALL1, "system": {"coeff": np.eye(3).reshape(1, 1, 3, 3).tolist()}}, "n=3"),
])
def test_config_errors_are_line_anchored(tmp_path, doc, needle):
    p = _write(tmp_path, "c.json", doc)
    with pytest.raises(ConfigError, match=needle) as info:
        load_config(p)
    assert str(info.value).startswith(f"{p}:")


def test_malformed_json_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"grid": {"d": 1,\n "N": 64 "h": 1}}')
    assert main(["kernel", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "bad.json:2:" in capsys.readouterr().err


def test_non_elliptic_system_exit_code(tmp_path):
    coeff = [[[[1, 0], [0, -1]]]]
    p = _write(tmp_path, "c.json", {"grid": SMALL1, "system": {"coeff": coeff}})
    assert main(["kernel", "--config", str(p)]) == EXIT_CONFIG


def test_kernel_command_is_reproducible(tmp_path):
    p = _write(tmp_path, "c.json", {"grid": SMALL1, "system": {"name": "laplacian"}, "seed": 4})
    assert main(["kernel", "--config", str(p), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["kernel", "--config", str(p), "--out", str(tmp_path / "b")]) == EXIT_OK
    for name in ("kernel_report.json", "kernel_0.bin", "manifest.json"):
        assert sha256_file(tmp_path / "a" / name) == sha256_file(tmp_path / "b" / name)
    rep = json.loads((tmp_path / "a" / "kernel_report.json").read_text())
    assert rep["semigroup_max"] < 1e-10
    assert rep["config_sha256"] and "calibration_sha256" in rep
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert set(man["outputs"]) == {"kernel_0.bin", "kernel_1.bin", "kernel_2.bin", "kernel_report.json"}


def test_extend_writes_halfspace_and_manifest(tmp_path):
    g = make_grid(**SMALL1)
    write_field(tmp_path / "f.bin", generate("bump", {}, g))
    p = _write(tmp_path, "c.json", {"grid": SMALL1, "field": {"path": "f.bin"}})
    assert main(["extend", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_OK
    u = read_halfspace(tmp_path / "o" / "halfspace.bin")
    assert u.gradient is not None
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["kappa"] == 1.0 and len(man["levels"]) == u.K
    assert list(man["inputs"].values()) == [sha256_file(tmp_path / "f.bin")]


def test_norms_on_constant_field_is_all_zero(tmp_path):
    cal = save_calibration(Calibration({"1|laplacian|carleson_bmo": [0.5, 2.0]}), tmp_path / "cal.json")
    p = _write(tmp_path, "c.json", {"grid": SMALL1, "field": {"generator": "constant", "params": {"c": 2}},
                                    "calibration": cal.name})
    assert main(["norms", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_OK
    rep = json.loads((tmp_path / "o" / "norms.json").read_text())
    for r in rep["results"]:
        v = r["value"]
        assert (v["bmo"] if isinstance(v, dict) else v) == 0.0
    assert rep["ratio"]["degenerate"] and rep["ratio"]["in_band"]
    assert rep["calibration_sha256"] is not None


def test_norms_on_log_abs_reports_ratio(tmp_path):
    cal = save_calibration(Calibration({"1|laplacian|carleson_bmo": [0.5, 2.0]}), tmp_path / "cal.json")
    p = _write(tmp_path, "c.json", {
        "grid": SMALL1, "field": {"generator": "log_abs"}, "calibration": str(cal), "seed": 2,
        "operations": [{"op": "carleson_norm"}, {"op": "osc_curve"}, {"op": "area_function"},
                       {"op": "holder_seminorm", "eta": 0.5}]})
    assert main(["norms", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_OK
    rep = json.loads((tmp_path / "o" / "norms.json").read_text())
    assert rep["results"][0]["value"] > 0
    assert rep["ratio"]["in_band"] is True
    assert read_field(tmp_path / "o" / "area_function.bin").grid.N == 256


def test_approx_on_bump_is_monotone(tmp_path):
    p = _write(tmp_path, "c.json", {"grid": SMALL1, "field": {"generator": "bump"}})
    assert main(["approx", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_OK
    rep = json.loads((tmp_path / "o" / "approx.json").read_text())
    assert all(r["monotone"] for r in rep["results"])
    rows = (tmp_path / "o" / "mollifier_convergence.csv").read_text().splitlines()
    assert rows[0] == "scale,bmo_distance"
    vals = np.array([float(r.split(",")[1]) for r in rows[1:]])
    assert np.all(np.diff(vals) >= 0)


def test_verify_with_corrupt_calibration_fails_fast(tmp_path, capsys):
    cal = save_calibration(Calibration({"1|laplacian|carleson_bmo": [0.5, 2.0]}), tmp_path / "cal.json")
    cal.write_text(cal.read_text().replace("2.0", "3.0"))
    p = _write(tmp_path, "c.json", {"grid": SMALL1, "dims": [1], "calibration": "cal.json"})
    assert main(["verify", "--config", str(p), "--out", str(tmp_path / "o"), "--filter", "kernel"]) == EXIT_CONFIG
    assert "sha256 mismatch" in capsys.readouterr().err


def test_verify_missing_calibration(tmp_path, capsys):
    p = _write(tmp_path, "c.json", {"grid": SMALL1, "dims": [1], "calibration": "absent.json"})
    assert main(["verify", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "--calibrate" in capsys.readouterr().err


def test_verify_filter_runs_only_kernel_criteria(tmp_path, capsys):
    cal = save_calibration(Calibration({}), tmp_path / "cal.json")
    p = _write(tmp_path, "c.json", {"grid": SMALL1, "dims": [1], "calibration": "cal.json"})
    out = tmp_path / "o"
    assert main(["verify", "--config", str(p), "--out", str(out), "--filter", "kernel"]) == EXIT_OK
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("[")]
    assert len(lines) == 5 and all(l.startswith("[PASS] C0") for l in lines)
    first = (out / "report.json").read_bytes()
    main(["verify", "--config", str(p), "--out", str(out), "--filter", "kernel"])
    assert (out / "report.json").read_bytes() == first


def test_seed_flag_validation(tmp_path):
    p = _write(tmp_path, "c.json", {"grid": SMALL1})
    assert main(["kernel", "--config", str(p), "--seed", str(2 ** 64)]) == EXIT_CONFIG
