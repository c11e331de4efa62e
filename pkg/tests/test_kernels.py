import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from hsbmo.exceptions import EllipticityError
from hsbmo.kernels import (
    RESIDUAL_TOL,
    build_propagator,
    decay_constants,
    expm_stack,
    harmonic_kernel_exact,
    homogeneity_error,
    kernel_array,
    named_system,
    normalization_error,
    semigroup_error,
    solvent,
    system_from_coefficients,
)


def test_non_elliptic_system_is_rejected():
    coeff = np.zeros((1, 1, 2, 2))
    coeff[0, 0] = np.diag([1.0, -1.0])
    with pytest.raises(EllipticityError) as info:
        system_from_coefficients(coeff)
    assert info.value.value < 0


def test_named_systems_have_expected_shapes():
    assert named_system("laplacian", 2).M == 1
    assert named_system("lame", 3).M == 3
    assert named_system("scalar_divA", 3).n == 3
    with pytest.raises(ValueError):
        named_system("unknown", 2)


def test_laplacian_solvent_is_minus_abs_xi():
    lam = solvent(named_system("laplacian", 3), [0.6, 0.8])
    assert lam.shape == (1, 1)
    assert lam[0, 0] == pytest.approx(-1.0, abs=1e-12)


def test_lame_solvent_residual_and_spectrum(lame2):
    assert lame2.max_residual_ratio() < 1.0
    assert lame2.max_residual_ratio() * RESIDUAL_TOL < 1e-10
    assert lame2.decay_rate > 0


@pytest.mark.parametrize("fixture", ["lap1", "lap2", "lame2"])
def test_normalization_and_semigroup(fixture, request):
    prop = request.getfixturevalue(fixture)
    S = prop.grid.S
    assert normalization_error(prop, S / 16) < 1e-8
    assert semigroup_error(prop, S / 32, S / 16) < 1e-10


def test_laplacian_matches_periodized_poisson_kernel(lap1):
    t = lap1.grid.S / 8
    K = kernel_array(lap1, t)[..., 0, 0].real
    exact = harmonic_kernel_exact(lap1.grid, t, periodic=True).values[..., 0].real
    inner = lap1.grid.radius() <= lap1.grid.S / 4
    rel = np.abs(K - exact)[inner] / np.abs(exact)[inner]
    assert rel.max() < 1e-4


def test_decay_constants_are_finite(lap2):
    dc = decay_constants(lap2, lap2.grid.S / 16)
    assert 0 < dc["C0"] < 10 and 0 < dc["C1"] < 10


def test_homogeneity_laplacian(grid1):
    assert homogeneity_error(named_system("laplacian", 2), grid1, grid1.S / 16) < 1e-6


def test_propagator_rejects_negative_time(lap1):
    with pytest.raises(ValueError):
        lap1.propagator(-1.0)


def test_propagator_identity_at_zero_frequency(lame2):
    E = lame2.propagator(0.7)
    np.testing.assert_allclose(E[0, 0], np.eye(3), atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), scale=st.floats(1e-3, 60.0))
def test_expm_stack_matches_scipy(seed, scale):
    rng = np.random.default_rng(seed)
    A = (rng.standard_normal((6, 3, 3)) + 1j * rng.standard_normal((6, 3, 3))) * scale / 3
    # keep the spectrum stable so exp(A) stays representable
    A = A - (np.abs(A).sum(axis=(1, 2)) / 3)[:, None, None] * np.eye(3)
    ours = expm_stack(A)
    ref = np.stack([scipy.linalg.expm(a) for a in A])
    scale_ref = np.maximum(np.linalg.norm(ref, axis=(1, 2)), 1e-300)
    err = np.linalg.norm(ours - ref, axis=(1, 2)) / scale_ref
    assert err.max() < 1e-10


def test_propagator_residual_ratio_small_for_laplacian(lap2):
    assert lap2.max_residual_ratio() < 1e-3


def test_build_rejects_dimension_mismatch(grid1):
    with pytest.raises(ValueError):
        build_propagator(named_system("laplacian", 3), grid1)
