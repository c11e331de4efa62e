import numpy as np
import pytest

from hsbmo.approx import (
    ModulusOfContinuity,
    default_scale_ladder,
    make_mollifier,
    mollifier_convergence,
    psi,
    psi_bound_check,
    psi_refined_bound,
    translation_test,
    upsilon_seminorm,
    upsilon_sharp,
    vmo_approximation_run,
)
from hsbmo.grid import generate
from hsbmo.seminorms import NOT_VANISHING, VANISHING


def test_upsilon_sharp_values():
    np.testing.assert_allclose(upsilon_sharp([0.0, 0.5, 1.0, np.e]), [0.0, 0.5, 1.0, 2.0])
    with pytest.raises(ValueError):
        upsilon_sharp(-1.0)


def test_modulus_validation():
    with pytest.raises(ValueError):
        ModulusOfContinuity(lambda s: 1.0 + 0 * s)
    with pytest.raises(ValueError):
        ModulusOfContinuity(lambda s: -s)
    assert ModulusOfContinuity.power(0.5)(4.0) == pytest.approx(2.0)


@pytest.mark.parametrize("a", [1e-3, 0.1, 1.0, 10.0, 1e3])
@pytest.mark.parametrize("n", [2, 3])
def test_psi_bound(a, n):
    value, bound, ok = psi_bound_check(a, n)
    assert ok and 0 < value <= bound


def test_psi_refined_bound_large_a():
    assert psi(100.0, 2) <= psi_refined_bound(100.0)


def test_upsilon_seminorm_of_lipschitz_field(grid1):
    f = generate("bump", {}, grid1)
    val = upsilon_seminorm(f, ModulusOfContinuity.sharp(), seed=0, n_random=1000)
    assert 0 < val < np.inf


def test_mollifiers_have_unit_mass():
    for name in ("gaussian", "bump"):
        assert make_mollifier(name, 1).name == name
    with pytest.raises(ValueError):
        make_mollifier("nope", 1)


def test_mollifier_convergence_on_bump(grid1):
    table = mollifier_convergence(generate("bump", {}, grid1))
    assert table.verdict == VANISHING
    assert np.all(np.diff(table.values) >= 0)


def test_translation_on_indicator_persists(grid1):
    table = translation_test(generate("indicator", {}, grid1))
    assert table.verdict == NOT_VANISHING
    with pytest.raises(ValueError):
        translation_test(generate("indicator", {}, grid1), z_ladder=[[0]])


def test_vmo_approximation_run(lap1):
    f = generate("bump", {}, lap1.grid)
    eps = default_scale_ladder(lap1.grid, points=5)
    table = vmo_approximation_run(f, lap1, eps, etas=(0.5,), seed=1)
    assert np.all(np.diff(table.values) > 0)
    assert set(table.columns) == {"grad_sup", "holder_0.5"}
    assert len(table.to_rows()[0]) == 4
    with pytest.raises(ValueError):
        vmo_approximation_run(f, lap1, [0.0])
