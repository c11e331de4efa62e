import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsbmo.extension import extend
from hsbmo.grid import generate, make_grid, translate
from hsbmo.seminorms import (
    INCONCLUSIVE,
    NOT_VANISHING,
    VANISHING,
    bmo_norm,
    carleson_norm,
    carleson_profile,
    decay_verdict,
    fit_loglog_slope,
    fractional_carleson,
    holder_seminorm,
    level_oscillations,
    morrey_campanato,
    osc_curve,
    oscillation_tail,
    vanishing_carleson_test,
)


def test_constant_has_zero_norms(lap2):
    f = generate("constant", {"c": 4.0}, lap2.grid)
    assert bmo_norm(f) == 0.0
    assert bmo_norm(f, p=2) == 0.0
    assert carleson_norm(extend(f, lap2)) == 0.0


def test_bmo_ignores_constants_and_translations(grid2):
    f = generate("log_abs", {}, grid2)
    c = generate("constant", {"c": 10.0}, grid2)
    b = bmo_norm(f)
    assert bmo_norm(f + c) == pytest.approx(b, rel=1e-10)
    assert bmo_norm(translate(f, [5, -3])) == pytest.approx(b, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(c=st.floats(0.01, 100.0), p=st.sampled_from([1.0, 2.0]))
def test_bmo_is_homogeneous(c, p):
    g = make_grid(1, 128, 1 / 8)
    f = generate("indicator", {}, g)
    assert bmo_norm(f.scaled(c), p) == pytest.approx(c * bmo_norm(f, p), rel=1e-10)


def test_sliding_dominates_tiling(grid1):
    f = generate("indicator", {"half_side": 1.3}, grid1)
    assert bmo_norm(f, sliding=True) >= bmo_norm(f, sliding=False) - 1e-14


def test_level_oscillations_brute_force(grid1):
    f = generate("lacunary_bmo", {}, grid1, seed=5)
    lev = level_oscillations(f, 2.0)
    v = f.values[:, 0]
    w = 8
    brute = max(np.sqrt(np.mean(np.abs(np.roll(v, -c)[:w] - np.roll(v, -c)[:w].mean()) ** 2))
                for c in range(grid1.N))
    assert lev[3] == pytest.approx(brute, rel=1e-10)


def test_osc_curve_is_monotone(grid2):
    c = osc_curve(generate("log_abs", {}, grid2))
    assert np.all(np.diff(c.values) >= 0)
    assert c.bmo == pytest.approx(bmo_norm(generate("log_abs", {}, grid2)))
    assert c.radii[0] == 2 * grid2.h


def test_unsupported_p():
    g = make_grid(1, 64, 1.0)
    with pytest.raises(ValueError):
        bmo_norm(generate("bump", {}, g), p=3.0)


def test_carleson_is_homogeneous(lap1):
    f = generate("log_abs", {}, lap1.grid)
    a = carleson_norm(extend(f, lap1))
    b = carleson_norm(extend(f.scaled(3.0), lap1))
    assert b == pytest.approx(3 * a, rel=1e-10)
    assert a > 0


def test_carleson_profile_monotone(lap2):
    prof = carleson_profile(extend(generate("log_abs", {}, lap2.grid), lap2))
    assert np.all(np.diff(prof.values) >= 0)
    assert prof.value_at(prof.radii[2] * 1.5) == prof.values[2]


def test_carleson_needs_gradient(lap1):
    u = extend(generate("bump", {}, lap1.grid), lap1, with_gradient=False)
    with pytest.raises(ValueError):
        carleson_norm(u)


def test_decay_verdict():
    assert decay_verdict(0.05, 1.0) == VANISHING
    assert decay_verdict(0.7, 1.0) == NOT_VANISHING
    assert decay_verdict(0.3, 1.0) == INCONCLUSIVE
    assert decay_verdict(1.0, 0.0) == VANISHING
    with pytest.raises(ValueError):
        decay_verdict(0.1, 1.0, vanish=0.6, persist=0.5)


def test_loglog_slope():
    x = np.geomspace(1, 100, 9)
    assert fit_loglog_slope(x, 3 * x ** 0.7) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        fit_loglog_slope([1.0], [1.0])


def test_holder_and_morrey_of_power(grid1):
    f = generate("power_eta", {"eta": 0.5}, grid1)
    hs = holder_seminorm(f, 0.5, seed=1)
    assert 0.9 < hs < 1.5
    assert morrey_campanato(f, 0.5) <= hs + 1e-12
    with pytest.raises(ValueError):
        morrey_campanato(f, 1.0)


def test_fractional_carleson_and_vanishing(lap1):
    u = extend(generate("bump", {}, lap1.grid), lap1)
    assert fractional_carleson(u, 0.5) > 0
    res = vanishing_carleson_test(u)
    assert res.verdict != NOT_VANISHING and res.ratio < 0.2


def test_log_abs_does_not_vanish(lap1):
    res = vanishing_carleson_test(extend(generate("log_abs", {}, lap1.grid), lap1))
    assert res.verdict == NOT_VANISHING


def test_oscillation_tail(grid1):
    f = generate("log_abs", {}, grid1)
    full = oscillation_tail(f, grid1.h, eps=1.0)
    assert 0 < full <= bmo_norm(f) + 1e-12
    with pytest.raises(ValueError):
        oscillation_tail(f, 2 * grid1.S)
