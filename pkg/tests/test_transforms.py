"""Fast transform round trips and scalar-product correctness."""

import numpy as np
import pytest
from numpy.polynomial import chebyshev as ncheb

from chebchan.matrices import _basis_coeffs, assemble
from chebchan.mesh import (PointFamily, Space, build_mesh, chebyshev_points,
                           quadrature_weights, wavenumber_grid)
from chebchan.transforms import (PhysicalField, SpectralField,
                                 chebyshev_evaluate, chebyshev_scalar,
                                 forward_transform, inverse_transform,
                                 shen_expand, shen_scalar)

FAMILIES = list(PointFamily)
SPACES = list(Space)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("space", SPACES)
@pytest.mark.parametrize("n_x", [8, 16, 32, 64])
def test_forward_inverse_roundtrip(n_x, space, family):
    rng = np.random.default_rng(n_x)
    mesh = build_mesh(n_x, 8, 4, 2 * np.pi, np.pi, family)
    coeffs = SpectralField(
        rng.standard_normal((n_x + 1 - space.mode_drop,) +
                            mesh.spectral_shape_yz)
        + 1j * rng.standard_normal((n_x + 1 - space.mode_drop,) +
                                   mesh.spectral_shape_yz),
        wavenumber_grid(mesh, space), mesh)
    # make coefficients consistent with a real field
    coeffs = forward_transform(
        PhysicalField(inverse_transform(coeffs).data, mesh), space)
    back = forward_transform(inverse_transform(coeffs), space)
    scale = max(np.abs(coeffs.data).max(), 1.0)
    assert np.abs(back.data - coeffs.data).max() / scale < 1e-12


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("space", SPACES)
@pytest.mark.parametrize("n_x", [8, 16, 64])
def test_inverse_forward_roundtrip(n_x, space, family):
    rng = np.random.default_rng(2 * n_x + 1)
    mesh = build_mesh(n_x, 8, 4, 2 * np.pi, np.pi, family)
    field = PhysicalField(rng.standard_normal(mesh.shape), mesh)
    coeffs = forward_transform(field, space)
    back = inverse_transform(coeffs)
    if space is Space.CHEBYSHEV:
        # full space interpolates exactly
        assert np.abs(back.data - field.data).max() < 1e-12
    else:
        # boundary-adapted spaces reproduce their own projection
        again = inverse_transform(forward_transform(back, space))
        assert np.abs(again.data - back.data).max() < 1e-12


@pytest.mark.parametrize("family", FAMILIES)
def test_chebyshev_scalar_matches_quadrature(family):
    n_x = 12
    x = chebyshev_points(n_x, family)
    w = quadrature_weights(n_x, family)
    rng = np.random.default_rng(0)
    f = rng.standard_normal(n_x + 1)
    got = chebyshev_scalar(f, family)
    for k in range(n_x + 1):
        tk = np.cos(k * np.arccos(np.clip(x, -1, 1)))
        assert np.isclose(got[k], np.dot(f * tk, w), atol=1e-12), k


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("space", [Space.DIRICHLET, Space.BIHARMONIC])
def test_shen_scalar_matches_quadrature(space, family):
    n_x = 12
    x = chebyshev_points(n_x, family)
    w = quadrature_weights(n_x, family)
    rng = np.random.default_rng(1)
    f = rng.standard_normal(n_x + 1)
    got = shen_scalar(f, family, space)
    for k in range(n_x + 1 - space.mode_drop):
        phi = ncheb.chebval(x, _basis_coeffs(k, space))
        assert np.isclose(got[k], np.dot(f * phi, w), atol=1e-12), k


@pytest.mark.parametrize("family", FAMILIES)
def test_chebyshev_evaluate_matches_chebval(family):
    n_x = 14
    rng = np.random.default_rng(3)
    c = rng.standard_normal(n_x + 1)
    x = chebyshev_points(n_x, family)
    got = chebyshev_evaluate(c, family)
    assert np.allclose(got, ncheb.chebval(x, c), atol=1e-12)


def test_shen_expand_dirichlet():
    # single Dirichlet mode k: T_k - T_{k+2}
    out = shen_expand(np.eye(1, 5, 3)[0], Space.DIRICHLET, 6)
    want = np.zeros(7)
    want[3], want[5] = 1.0, -1.0
    assert np.allclose(out, want)


def test_dirichlet_mean_mode_is_constant_in_plane():
    # coefficient n_y*n_z at (l=0, m=0, n=0) -> physical 1 - T_2(x)
    mesh = build_mesh(8, 4, 4, 2 * np.pi, np.pi, PointFamily.GAUSS)
    data = np.zeros((7,) + mesh.spectral_shape_yz, dtype=complex)
    data[0, 0, 0] = mesh.n_y * mesh.n_z
    field = inverse_transform(SpectralField(
        data, wavenumber_grid(mesh, Space.DIRICHLET), mesh))
    want = (1 - (2 * mesh.x ** 2 - 1))[:, None, None]
    assert np.abs(field.data - want).max() < 1e-13


def test_single_fourier_mode_lands_on_expected_coefficient():
    mesh = build_mesh(8, 8, 4, 2 * np.pi, np.pi, PointFamily.GAUSS)
    x = mesh.x[:, None, None]
    y = (np.arange(8) * 2 * np.pi / 8)[None, :, None]
    phi3 = ncheb.chebval(mesh.x, _basis_coeffs(3, Space.DIRICHLET))
    field = PhysicalField(phi3[:, None, None] * np.cos(y)
                          * np.ones(mesh.shape), mesh)
    coeffs = forward_transform(field, Space.DIRICHLET)
    # cos(y) splits into m = +1 and m = -1 with weight n_y*n_z/2 each
    want = mesh.n_y * mesh.n_z / 2
    assert np.isclose(coeffs.data[3, 1, 0], want, atol=1e-10)
    assert np.isclose(coeffs.data[3, -1, 0], want, atol=1e-10)
    others = coeffs.data.copy()
    others[3, 1, 0] = others[3, -1, 0] = 0.0
    assert np.abs(others).max() < 1e-10


def test_inverse_transform_is_real():
    rng = np.random.default_rng(9)
    mesh = build_mesh(16, 8, 4, 2 * np.pi, np.pi, PointFamily.GAUSS)
    field = PhysicalField(rng.standard_normal(mesh.shape), mesh)
    coeffs = forward_transform(field, Space.DIRICHLET)
    back = inverse_transform(coeffs)
    assert np.isrealobj(back.data) or np.abs(back.data.imag).max() < 1e-12


def test_shape_validation():
    mesh = build_mesh(8, 4, 2, 1.0, 1.0, PointFamily.GAUSS)
    with pytest.raises(ValueError):
        PhysicalField(np.zeros((3, 3, 3)), mesh)
