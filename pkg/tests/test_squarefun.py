import numpy as np
import pytest

from hsbmo.extension import default_ladder, extend
from hsbmo.grid import generate
from hsbmo.seminorms import carleson_norm
from hsbmo.squarefun import (
    Atom,
    area_function,
    atom_square_norm,
    calderon_convergence,
    calderon_identity_check,
    carleson_operator,
    cone_stencil,
    log_trapezoid_weights,
    make_atom,
    molecule_check,
    tent_duality_ratio,
    theta_cancellation,
    theta_field,
)


def test_log_trapezoid_weights_integrate_dt_over_t():
    t = np.geomspace(0.01, 4.0, 30)
    assert log_trapezoid_weights(t).sum() == pytest.approx(np.log(400.0))


def test_cone_stencil_grows_with_height(grid2):
    t = (grid2.h, 4 * grid2.h)
    st = cone_stencil(grid2, 1.0, t)
    assert st.level(0).shape[0] < st.level(1).shape[0]
    assert np.all((st.level(1) ** 2).sum(axis=1) < 16)
    with pytest.raises(ValueError):
        cone_stencil(grid2, 0.0, t)


def test_area_function_is_homogeneous_and_zero_on_zero(lap1):
    t = default_ladder(lap1.grid)
    F = theta_field(generate("log_abs", {}, lap1.grid), lap1, 2, t)
    A = area_function(F, t, lap1.grid)
    A3 = area_function(3 * F, t, lap1.grid)
    np.testing.assert_allclose(A3.values, 3 * A.values, rtol=1e-10, atol=1e-14)
    assert np.abs(area_function(0 * F, t, lap1.grid).values).max() == 0.0


def test_carleson_operator_matches_carleson_norm(lap1):
    # C(t d_t u) at its maximum equals the t-channel Carleson norm
    f = generate("log_abs", {}, lap1.grid)
    u = extend(f, lap1)
    F = u.gradient[lap1.grid.d] * u.t_levels[:, None, None]
    C = carleson_operator(F, u.t_levels, lap1.grid)
    assert np.abs(C.values).max() == pytest.approx(carleson_norm(u, channels=[1]), rel=1e-10)


def test_tent_duality_zero_pair(lap1):
    t = default_ladder(lap1.grid)
    Z = np.zeros((t.size,) + lap1.grid.shape + (1,), complex)
    res = tent_duality_ratio(Z, Z, t, lap1.grid)
    assert res.degenerate and res.ratio == 0.0


def test_tent_duality_ratio_bounded(lap1, rng):
    t = default_ladder(lap1.grid)
    F = rng.standard_normal((t.size,) + lap1.grid.shape + (1,))
    G = rng.standard_normal((t.size,) + lap1.grid.shape + (1,))
    res = tent_duality_ratio(F, G, t, lap1.grid)
    assert 0 < res.ratio < 1


def test_atoms_are_valid_and_have_bounded_square_function(lap1):
    atom = make_atom(lap1.grid, seed=3, level=3)
    f = atom.field()
    assert abs(f.values.sum()) < 1e-10
    assert np.abs(f.values).max() <= (1 + 1e-12) / atom.volume
    norm = atom_square_norm(atom, lap1, default_ladder(lap1.grid))
    assert 0 < norm < 10


def test_atom_validation(grid1):
    with pytest.raises(ValueError):
        Atom(grid1, (0,), 4, np.ones(4))
    with pytest.raises(ValueError):
        Atom(grid1, (0,), 4, np.array([100.0, -100.0, 0.0, 0.0]))


def test_theta_has_mean_zero(lame2):
    assert theta_cancellation(lame2, lame2.grid.S / 16) < 1e-8


def test_calderon_identity(lap1):
    S = lap1.grid.S
    assert calderon_identity_check(lap1, S / 32, S / 8, nodes=64) < 1e-4
    conv = calderon_convergence(lap1, S / 32, S / 8)
    assert conv["converged"]
    with pytest.raises(ValueError):
        calderon_identity_check(lap1, S / 8, S / 32)


def test_molecule_check(lap1):
    res = molecule_check(lap1, lap1.grid.S / 128 * 4)
    assert res["expected_slope"] == -1.5
    assert len(res["annulus_norms"]) >= 4
    with pytest.raises(ValueError):
        molecule_check(lap1, lap1.grid.S / 2)
