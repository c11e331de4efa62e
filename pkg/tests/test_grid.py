import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsbmo.grid import (
    Cube,
    DyadicCubeFamily,
    SampledField,
    cube_statistics,
    dilate,
    generate,
    geometric_ladder,
    make_grid,
    translate,
)


@pytest.mark.parametrize("d,N,h", [(3, 64, 1.0), (1, 100, 1.0), (1, 4, 1.0), (2, 64, 0.0), (1, 64, -1.0)])
def test_make_grid_rejects_bad_shapes(d, N, h):
    with pytest.raises(ValueError):
        make_grid(d, N, h)


def test_grid_geometry(grid1, grid2):
    assert grid1.S == 8.0 and grid2.S == 4.0
    assert grid1.axis()[grid1.N // 2] == 0.0
    assert grid2.radius()[32, 32] == 0.0
    assert grid2.max_level == 5
    assert grid1.index_of([0.0]) == (128,)
    assert grid2.to_dict() == {"d": 2, "N": 64, "h": 0.125}


def test_torus_distance_wraps(grid1):
    assert grid1.torus_distance(np.array([[grid1.N - 1]]))[0] == pytest.approx(grid1.h)


def test_field_shape_and_finiteness(grid1):
    with pytest.raises(ValueError):
        SampledField(grid1, np.zeros(10))
    bad = np.zeros(grid1.shape)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        SampledField(grid1, bad)
    f = SampledField(grid1, np.ones(grid1.shape))
    assert f.M == 1 and not f.values.flags.writeable


@pytest.mark.parametrize("name", ["constant", "power_eta", "log_abs", "bump", "lacunary_bmo", "indicator"])
def test_generators_are_deterministic(grid2, name):
    a = generate(name, {"M": 2}, grid2, seed=7)
    b = generate(name, {"M": 2}, grid2, seed=7)
    assert a.M == 2
    np.testing.assert_array_equal(a.values, b.values)


def test_generator_errors(grid1):
    with pytest.raises(ValueError):
        generate("nope", {}, grid1)
    with pytest.raises(ValueError):
        generate("power_eta", {"eta": 1.5}, grid1)
    with pytest.raises(ValueError):
        generate("bump", {"radius": grid1.S}, grid1)
    with pytest.raises(ValueError):
        generate("constant", {"M": 2, "direction": [1.0]}, grid1)


def test_geometric_ladder():
    t = geometric_ladder(0.5, 2 ** 0.25, 8.0)
    assert t[0] == 0.5 and t[-1] == pytest.approx(8.0)
    np.testing.assert_allclose(t[1:] / t[:-1], 2 ** 0.25)
    with pytest.raises(ValueError):
        geometric_ladder(0.5, 3.0, 8.0)


def test_dyadic_family_counts(grid1):
    tiling = DyadicCubeFamily(grid1, sliding=False)
    sliding = DyadicCubeFamily(grid1)
    assert tiling.count(3) == grid1.N // 8
    assert sliding.count(3) == grid1.N
    assert sum(1 for _ in tiling.cubes(4)) == grid1.N // 16
    with pytest.raises(ValueError):
        DyadicCubeFamily(grid1, levels=(grid1.max_level + 1,))


def test_cube_statistics_of_constant_is_zero(grid2):
    f = generate("constant", {"c": 3.0}, grid2)
    mean, osc = cube_statistics(f, Cube(3, (60, 2)), p=2)
    assert osc == 0.0 and mean[0] == pytest.approx(3.0)


@settings(max_examples=30, deadline=None)
@given(z=st.integers(-300, 300))
def test_translation_is_invertible(z):
    g = make_grid(1, 64, 0.25)
    f = generate("bump", {}, g)
    back = translate(translate(f, [z]), [-z])
    np.testing.assert_array_equal(back.values, f.values)


def test_translate_rejects_fractional(grid1):
    f = generate("bump", {}, grid1)
    with pytest.raises(ValueError):
        translate(f, [0.5])


def test_dilate(grid1):
    f = generate("power_eta", {"eta": 0.5}, grid1)
    g = dilate(f, 2)
    k = grid1.N // 2 + 10
    assert g.values[k, 0] == pytest.approx(f.values[grid1.N // 2 + 20, 0])
    with pytest.raises(ValueError):
        dilate(f, 3)
