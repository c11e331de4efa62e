import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hsbmo.estimators import CarlesonMeasure, MeanOscillation, PoissonExtension
from hsbmo.grid import HalfSpaceField, generate
from hsbmo.seminorms import bmo_norm, carleson_norm
from hsbmo.validation import check_field, check_fields, check_ladder


def test_params_round_trip():
    est = PoissonExtension(system="lame", system_params={"mu": 2.0}, with_gradient=False)
    assert clone(est).get_params() == est.get_params()
    est.set_params(system="laplacian")
    assert est.system == "laplacian"


def test_extension_transform(grid1):
    f = generate("log_abs", {}, grid1)
    ext = PoissonExtension().fit(f)
    u = ext.transform(f)
    assert isinstance(u, HalfSpaceField) and u.K == ext.t_levels_.size
    us = ext.transform([f, f])
    assert len(us) == 2
    with pytest.raises(NotFittedError):
        PoissonExtension().transform(f)


def test_extension_rejects_wrong_components(grid2):
    with pytest.raises(ValueError):
        PoissonExtension(system="lame").fit(generate("bump", {"M": 1}, grid2))


def test_mean_oscillation(grid1):
    fs = [generate("log_abs", {}, grid1), generate("bump", {}, grid1)]
    mo = MeanOscillation(p=2).fit(fs)
    X = mo.transform(fs)
    assert X.shape == (2, mo.radii_.size)
    assert X[0, -1] == pytest.approx(bmo_norm(fs[0], 2))
    assert mo.score(fs) == pytest.approx(-max(bmo_norm(f, 2) for f in fs))


def test_carleson_measure(lap1):
    f = generate("log_abs", {}, lap1.grid)
    cm = CarlesonMeasure().fit(f)
    n = cm.norms(f)
    u = PoissonExtension().fit(f).transform(f)
    assert n[0] == pytest.approx(carleson_norm(u))
    assert CarlesonMeasure().fit(u).norms([u])[0] == pytest.approx(n[0])


def test_validation_helpers(grid1):
    raw = np.zeros(grid1.shape)
    assert check_field(raw, grid1).M == 1
    with pytest.raises(TypeError):
        check_field(raw)
    with pytest.raises(ValueError):
        check_field(generate("bump", {"M": 2}, grid1), M=1)
    with pytest.raises(ValueError):
        check_fields([])
    with pytest.raises(ValueError):
        check_ladder([0.5, 0.25])
