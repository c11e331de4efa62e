import json

import numpy as np
import pytest

from hsbmo.calibration import Calibration, load_calibration, save_calibration
from hsbmo.exceptions import CalibrationError, ConfigError
from hsbmo.extension import default_ladder, extend
from hsbmo.grid import generate
from hsbmo.io import (
    canonical_json,
    field_from_bytes,
    field_to_bytes,
    read_field,
    read_field_csv,
    read_halfspace,
    read_propagator_cache,
    write_field,
    write_field_csv,
    write_halfspace,
    write_manifest,
    write_propagator_cache,
)
from hsbmo.kernels import named_system


def test_field_binary_round_trip(tmp_path, grid2):
    f = generate("lacunary_bmo", {"M": 2}, grid2, seed=9)
    g = read_field(write_field(tmp_path / "f.bin", f))
    assert g.grid == f.grid
    np.testing.assert_array_equal(g.values, f.values)


def test_field_binary_rejects_damage(grid1):
    buf = field_to_bytes(generate("bump", {}, grid1))
    with pytest.raises(ConfigError):
        field_from_bytes(buf[:-3])
    with pytest.raises(ConfigError):
        field_from_bytes(b"XXXXXX" + buf[6:])
    with pytest.raises(ConfigError):
        field_from_bytes(buf + b"\0")


def test_field_csv_round_trip(tmp_path, grid2):
    f = generate("log_abs", {"M": 2, "direction": [1.0, 1j]}, grid2)
    path = write_field_csv(tmp_path / "f.csv", f)
    g = read_field_csv(path)
    assert g.grid == grid2
    np.testing.assert_array_equal(g.values, f.values)


def test_halfspace_round_trip(tmp_path, lap1):
    u = extend(generate("bump", {}, lap1.grid), lap1, default_ladder(lap1.grid)[::4])
    v = read_halfspace(write_halfspace(tmp_path / "u.bin", u, include_gradient=True))
    np.testing.assert_array_equal(v.values, u.values)
    np.testing.assert_array_equal(v.gradient, u.gradient)
    np.testing.assert_array_equal(v.t_levels, u.t_levels)
    w = read_halfspace(write_halfspace(tmp_path / "w.bin", u))
    assert w.gradient is None


def test_propagator_cache(tmp_path, lame2):
    path = write_propagator_cache(tmp_path / "p.bin", lame2)
    p = read_propagator_cache(path, lame2.system)
    np.testing.assert_array_equal(p.solvents, lame2.solvents)
    with pytest.raises(ConfigError):
        read_propagator_cache(path, named_system("lame", 3, mu=2.0))


def test_canonical_json_is_stable():
    a = canonical_json({"b": np.float64(1.5), "a": [np.int64(2), float("nan")]})
    b = canonical_json({"a": [2, float("nan")], "b": 1.5})
    assert a == b and '"nan"' in a


def test_manifest_lists_checksums(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("hello")
    man = json.loads(write_manifest(tmp_path, {"command": "t"}, [p]).read_text())
    assert man["outputs"]["x.txt"] == "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"


def test_calibration_round_trip_and_tamper(tmp_path):
    cal = Calibration({"1|laplacian|carleson_bmo": [0.5, 2.0]}, {"seed": 1})
    path = save_calibration(cal, tmp_path / "cal.json")
    loaded = load_calibration(path)
    assert loaded.band(1, "laplacian", "carleson_bmo") == (0.5, 2.0)
    assert loaded.digest == cal.digest
    doc = json.loads(path.read_text())
    doc["bands"]["1|laplacian|carleson_bmo"] = [0.1, 9.0]
    path.write_text(json.dumps(doc))
    with pytest.raises(CalibrationError, match="sha256 mismatch"):
        load_calibration(path)


def test_calibration_missing_and_malformed(tmp_path):
    with pytest.raises(CalibrationError, match="not found"):
        load_calibration(tmp_path / "none.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"bands":\n  [}')
    with pytest.raises(CalibrationError, match=":2:"):
        load_calibration(bad)
    with pytest.raises(CalibrationError):
        Calibration({}).band(1, "x", "y")
