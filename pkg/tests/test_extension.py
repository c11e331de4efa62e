import numpy as np
import pytest

from hsbmo.extension import default_ladder, extend, nontangential_trace, vertical_shift
from hsbmo.grid import generate


def test_default_ladder_contains_dyadic_sides(grid1):
    t = default_ladder(grid1)
    assert t[0] == pytest.approx(grid1.h / 2) and t[-1] == pytest.approx(grid1.S)
    for l in range(grid1.max_level + 1):
        assert np.min(np.abs(t - grid1.h * 2 ** l)) < 1e-12 * grid1.S


def test_constant_extends_to_constant(lap2):
    f = generate("constant", {"c": 2.5}, lap2.grid)
    u = extend(f, lap2)
    np.testing.assert_allclose(u.values, 2.5, atol=1e-12)
    assert np.abs(u.gradient).max() < 1e-12


def test_extension_is_linear(lap1):
    f = generate("bump", {}, lap1.grid)
    g = generate("log_abs", {}, lap1.grid)
    t = default_ladder(lap1.grid)[::4]
    lhs = extend(f.scaled(2.0) + g, lap1, t).values
    rhs = 2 * extend(f, lap1, t).values + extend(g, lap1, t).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_small_heights_recover_smooth_data(lap1):
    f = generate("bump", {}, lap1.grid)
    u = extend(f, lap1, [lap1.grid.h / 8, lap1.grid.h / 4], with_gradient=False)
    err = [np.abs(u.values[k] - f.values).max() for k in range(2)]
    assert err[0] < err[1] < 1e-2
    assert u.gradient is None


def test_vertical_shift_matches_direct_extension(lap1):
    f = generate("indicator", {"half_side": 1.0}, lap1.grid)
    t = default_ladder(lap1.grid)[::4]
    eps = 0.3
    shifted = vertical_shift(extend(f, lap1, t), eps)
    direct = extend(f, lap1, t + eps)
    np.testing.assert_allclose(shifted.values, direct.values, atol=1e-12)
    with pytest.raises(ValueError):
        vertical_shift(shifted, -1.0)


def test_component_mismatch_rejected(lame2):
    f = generate("bump", {"M": 1}, lame2.grid)
    with pytest.raises(ValueError):
        extend(f, lame2)


def test_vector_extension_keeps_constants(lame2):
    f = generate("constant", {"M": 3, "direction": [1.0, -2.0, 0.5j]}, lame2.grid)
    u = extend(f, lame2, [0.3, 0.5])
    np.testing.assert_allclose(u.values[1], f.values, atol=1e-11)


def test_nontangential_trace_diagnostic(lap1):
    f = generate("bump", {}, lap1.grid)
    u = extend(f, lap1)
    trace, diag = nontangential_trace(u)
    # t_min = h/2 on a coarse grid: first-order agreement only
    assert np.abs(trace.values - f.values).max() < 0.03
    assert diag.max() < 0.2
    with pytest.raises(ValueError):
        nontangential_trace(u, kappa=0.0)
