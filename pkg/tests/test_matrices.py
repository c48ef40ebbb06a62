"""Galerkin matrices against the brute-force quadrature oracle."""

import numpy as np
import pytest

from chebchan.matrices import assemble, dense_oracle, tail_factors
from chebchan.mesh import PointFamily, Space

FAMILIES = list(PointFamily)
SIZES = [8, 16, 32]

# (attribute, row space, column space, derivative order, sign)
# sign = -1 for the stiffness matrices, stored as -(phi''_j, phi_k)
CASES = [
    ("mass_dir", Space.DIRICHLET, Space.DIRICHLET, 0, 1),
    ("mass_bih", Space.BIHARMONIC, Space.BIHARMONIC, 0, 1),
    ("mixed_mass", Space.BIHARMONIC, Space.DIRICHLET, 0, 1),
    ("stiff_dir", Space.DIRICHLET, Space.DIRICHLET, 2, -1),
    ("stiff_bih", Space.BIHARMONIC, Space.BIHARMONIC, 2, -1),
    ("fourth_bih", Space.BIHARMONIC, Space.BIHARMONIC, 4, 1),
    ("deriv_dir_to_bih", Space.BIHARMONIC, Space.DIRICHLET, 1, 1),
    ("deriv_bih_to_dir", Space.DIRICHLET, Space.BIHARMONIC, 1, 1),
    ("deriv_dir_to_cheb", Space.CHEBYSHEV, Space.DIRICHLET, 1, 1),
]


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("n_x", SIZES)
@pytest.mark.parametrize("case", CASES, ids=[c[0] for c in CASES])
def test_structured_matches_quadrature_oracle(case, n_x, family):
    name, row_space, col_space, order, sign = case
    mats = assemble(n_x, family)
    got = mats.named(name).dense()
    want = sign * dense_oracle(row_space, col_space, order, n_x, family)
    scale = max(np.abs(want).max(), 1.0)
    assert np.abs(got - want).max() / scale < 1e-11, name


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("n_x", SIZES)
def test_chebyshev_mass_diagonal(n_x, family):
    mats = assemble(n_x, family)
    want = dense_oracle(Space.CHEBYSHEV, Space.CHEBYSHEV, 0, n_x, family)
    assert np.abs(np.diag(mats.mass_cheb) - want).max() < 1e-11
    # c_0 = 2 always; c_N = 2 only with the endpoint family
    assert np.isclose(mats.mass_cheb[0], np.pi)
    expect_last = np.pi if family is PointFamily.GAUSS_LOBATTO else np.pi / 2
    assert np.isclose(mats.mass_cheb[n_x], expect_last)


def test_dirichlet_mass_closed_form():
    n_x = 12
    mats = assemble(n_x, PointFamily.GAUSS)
    k = np.arange(n_x - 1)
    c = np.where(k == 0, 2.0, 1.0)
    dense = mats.mass_dir.dense()
    assert np.allclose(np.diag(dense), (np.pi / 2) * (c + 1))
    assert np.allclose(np.diag(dense, 2), -np.pi / 2)
    assert np.allclose(dense, dense.T)


def test_dirichlet_stiffness_closed_form():
    n_x = 12
    mats = assemble(n_x, PointFamily.GAUSS)
    dense = mats.stiff_dir.dense()
    k = np.arange(n_x - 1)
    assert np.allclose(np.diag(dense), 2 * np.pi * (k + 1) * (k + 2))
    # constant tail along each row: 4 pi (k+1) for j = k+2, k+4, ...
    for kk in range(n_x - 3):
        row = dense[kk, kk + 2::2]
        assert np.allclose(row, 4 * np.pi * (kk + 1))
    # lower triangle empty
    assert np.abs(np.tril(dense, -1)).max() == 0.0


def test_fourth_order_diagonal_positive():
    mats = assemble(16, PointFamily.GAUSS)
    assert (np.diag(mats.fourth_bih.dense()) > 0).all()


def test_tail_factors_match_far_entries():
    n_x = 16
    mats = assemble(n_x, PointFamily.GAUSS)
    dense = mats.fourth_bih.dense()
    p, q, r, s = tail_factors(n_x - 3)
    for k in range(n_x - 3):
        for j in range(k + 2, n_x - 3, 2):
            assert np.isclose(dense[k, j], p[k] * q[j] + r[k] * s[j],
                              rtol=1e-12), (k, j)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("case", CASES, ids=[c[0] for c in CASES])
def test_apply_equals_dense_multiply(case, family):
    name = case[0]
    mats = assemble(16, family)
    mat = mats.named(name)
    rng = np.random.default_rng(5)
    x = rng.standard_normal((mat.shape[1], 3, 2))
    got = mat.apply(x)
    want = np.einsum("kj,jab->kab", mat.dense(), x)
    scale = max(np.abs(want).max(), 1.0)
    assert np.abs(got - want).max() / scale < 1e-13


def test_apply_complex_input():
    mats = assemble(16, PointFamily.GAUSS)
    rng = np.random.default_rng(6)
    x = rng.standard_normal((mats.n_dir, 4)) \
        + 1j * rng.standard_normal((mats.n_dir, 4))
    got = mats.stiff_dir.apply(x)
    want = mats.stiff_dir.dense() @ x
    assert np.abs(got - want).max() < 1e-12


def test_stiffness_family_independent():
    # second- and fourth-derivative products involve only polynomials of
    # low enough degree, so both quadratures give identical matrices
    a = assemble(16, PointFamily.GAUSS)
    b = assemble(16, PointFamily.GAUSS_LOBATTO)
    assert np.allclose(a.stiff_dir.dense(), b.stiff_dir.dense())
    assert np.allclose(a.stiff_bih.dense(), b.stiff_bih.dense())


def test_assemble_is_cached():
    assert assemble(16, PointFamily.GAUSS) is assemble(16, PointFamily.GAUSS)


def test_named_unknown_raises():
    mats = assemble(8, PointFamily.GAUSS)
    with pytest.raises(KeyError):
        mats.named("no_such_matrix")
