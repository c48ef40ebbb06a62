"""One-dimensional scalar-product matrices for the Shen/Chebyshev bases.

All matrices represent discrete weighted scalar products between basis
functions of the three wall-normal spaces (Chebyshev T_k, Dirichlet
``phi_k = T_k - T_{k+2}`` and biharmonic
``phi_k = T_k - 2(k+2)/(k+3) T_{k+2} + (k+1)/(k+3) T_{k+4}``).
Mass matrices are banded with stride-2 coupling; the derivative couplings
are banded with stride-2 parity; the first-derivative/Chebyshev coupling
and the Dirichlet stiffness have constant row tails; the fourth-derivative
matrix has a rank-2 upper tail ``p_k q_j + r_k s_j``.

Everything decouples into even and odd mode subsets (entries vanish for
odd ``k - j``, or even ``k - j`` for the first-derivative matrices).

A brute-force quadrature oracle (`dense_oracle`) is provided for testing;
it evaluates basis functions on the collocation points and sums the
weighted products directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as _cheb

from .mesh import PointFamily, Space, chebyshev_points, quadrature_weights

__all__ = [
    "BandedMatrix",
    "ConstantTailMatrix",
    "Rank2TailMatrix",
    "MatrixSet",
    "assemble",
    "dense_oracle",
    "tail_factors",
]


def _bcast(v: np.ndarray, like: np.ndarray) -> np.ndarray:
    """Reshape a 1-D coefficient vector for broadcasting along axis 0."""
    return v.reshape((-1,) + (1,) * (like.ndim - 1))


@dataclass(frozen=True)
class BandedMatrix:
    """Sparse matrix stored by diagonals; possibly rectangular.

    ``diagonals[i]`` holds the entries (k, k + offsets[i]) for the valid
    row range of that offset, indexed from the first valid row.
    """

    shape: tuple[int, int]
    offsets: tuple[int, ...]
    diagonals: tuple[np.ndarray, ...]

    def _row_range(self, d: int) -> tuple[int, int]:
        nr, nc = self.shape
        return max(0, -d), min(nr, nc - d)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Matrix-vector product along axis 0 of ``x``."""
        nr, nc = self.shape
        if x.shape[0] != nc:
            raise ValueError(f"expected leading size {nc}, got {x.shape[0]}")
        y = np.zeros((nr,) + x.shape[1:], dtype=np.result_type(x, float))
        for d, diag in zip(self.offsets, self.diagonals):
            k0, k1 = self._row_range(d)
            y[k0:k1] += _bcast(diag, x) * x[k0 + d:k1 + d]
        return y

    def dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for d, diag in zip(self.offsets, self.diagonals):
            k0, k1 = self._row_range(d)
            out[np.arange(k0, k1), np.arange(k0, k1) + d] = diag
        return out

    def diagonal(self, d: int) -> np.ndarray:
        return self.diagonals[self.offsets.index(d)]


def _parity_suffix_sum(v: np.ndarray) -> np.ndarray:
    """S[j] = sum of v[j], v[j+2], v[j+4], ... along axis 0."""
    s = np.empty_like(v)
    s[-2:] = v[-2:]
    for j in range(v.shape[0] - 3, -1, -1):
        s[j] = v[j] + s[j + 2]
    return s


@dataclass(frozen=True)
class ConstantTailMatrix:
    """Banded part plus rows that are constant from some column onwards.

    Row ``k`` carries the value ``tail[k]`` at every column
    ``j = k + tail_start, k + tail_start + 2, ...``.
    """

    banded: BandedMatrix
    tail: np.ndarray
    tail_start: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.banded.shape

    def apply(self, x: np.ndarray) -> np.ndarray:
        y = self.banded.apply(x)
        s = _parity_suffix_sum(x)
        nr, nc = self.shape
        for k in range(nr):
            j = k + self.tail_start
            if j < nc:
                y[k] += self.tail[k] * s[j]
        return y

    def dense(self) -> np.ndarray:
        out = self.banded.dense()
        nr, nc = self.shape
        for k in range(nr):
            out[k, k + self.tail_start::2] += self.tail[k]
        return out


@dataclass(frozen=True)
class Rank2TailMatrix:
    """Diagonal plus the rank-2 upper tail ``p_k q_j + r_k s_j``.

    Tail entries occupy ``j = k + 2, k + 4, ...`` (even ``k - j``).
    """

    diag: np.ndarray
    p: np.ndarray
    q: np.ndarray
    r: np.ndarray
    s: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        n = self.diag.shape[0]
        return (n, n)

    def apply(self, x: np.ndarray) -> np.ndarray:
        y = _bcast(self.diag, x) * x
        sq = _parity_suffix_sum(_bcast(self.q, x) * x)
        ss = _parity_suffix_sum(_bcast(self.s, x) * x)
        n = x.shape[0]
        y[:n - 2] += _bcast(self.p[:n - 2], x) * sq[2:]
        y[:n - 2] += _bcast(self.r[:n - 2], x) * ss[2:]
        return y

    def dense(self) -> np.ndarray:
        n = self.diag.shape[0]
        out = np.diag(self.diag)
        for k in range(n - 2):
            j = np.arange(k + 2, n, 2)
            out[k, j] = self.p[k] * self.q[j] + self.r[k] * self.s[j]
        return out


def tail_factors(n_modes: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Row/column factors (p, q, r, s) of the fourth-derivative tail."""
    k = np.arange(n_modes, dtype=float)
    p = 8 * k * (k + 1) * (k + 2) * (k + 4) * np.pi
    q = 1.0 / (k + 3)
    r = 24 * (k + 1) * (k + 2) * np.pi
    s = (k + 2) ** 2 / (k + 3)
    return p, q, r, s


# ----------------------------------------------------------------------
# exact coefficient-space scalar products (for the stiffness matrices,
# whose integrands stay below the quadrature exactness degree on both
# point families)

def _basis_coeffs(k: int, space: Space) -> np.ndarray:
    if space is Space.CHEBYSHEV:
        c = np.zeros(k + 1)
        c[k] = 1.0
    elif space is Space.DIRICHLET:
        c = np.zeros(k + 3)
        c[k], c[k + 2] = 1.0, -1.0
    else:
        c = np.zeros(k + 5)
        c[k] = 1.0
        c[k + 2] = -2.0 * (k + 2) / (k + 3)
        c[k + 4] = (k + 1) / (k + 3)
    return c

def _exact_entry(row_k: int, row_space: Space, der_coeffs: np.ndarray) -> float:
    """(p, phi_row_k)_sigma for a polynomial p given by Chebyshev coeffs."""
    rc = _basis_coeffs(row_k, row_space)
    n = min(len(rc), len(der_coeffs))
    c = np.ones(n)
    if n > 0:
        c[0] = 2.0
    return float(np.dot(rc[:n], der_coeffs[:n] * c[:n]) * np.pi / 2)

def _deriv_product_diagonals(row_space: Space, col_space: Space, order: int,
                             nrow: int, ncol: int, offsets: tuple[int, ...]):
    diags = {d: np.zeros(min(nrow, ncol - d) - max(0, -d)) for d in offsets}
    for j in range(ncol):
        c = _basis_coeffs(j, col_space)
        for _ in range(order):
            c = _cheb.chebder(c)
        for d in offsets:
            k = j - d
            if max(0, -d) <= k < min(nrow, ncol - d):
                diags[d][k - max(0, -d)] = _exact_entry(k, row_space, c)
    return [diags[d] for d in offsets]


@dataclass(frozen=True)
class MatrixSet:
    """All assembled 1-D matrices for a given resolution and point family.

    Notation: ``dir`` = Dirichlet space, ``bih`` = biharmonic space,
    ``cheb`` = plain Chebyshev.  The stiffness matrices hold the
    *negated* second-derivative products ``-(phi''_j, phi_k)`` and are
    positive definite.  ``fourth_bih`` is the raw ``(phi''''_j, phi_k)``.
    """

    n_x: int
    family: PointFamily
    mass_cheb: np.ndarray              # diagonal of (T_j, T_k)
    mass_dir: BandedMatrix             # (phi_j, phi_k), Dirichlet
    mass_bih: BandedMatrix             # (phi_j, phi_k), biharmonic
    mixed_mass: BandedMatrix           # (phi-dir_j, phi-bih_k)
    stiff_dir: ConstantTailMatrix      # -(phi''_j, phi_k), Dirichlet
    stiff_bih: BandedMatrix            # -(phi''_j, phi_k), biharmonic
    fourth_bih: Rank2TailMatrix        # (phi''''_j, phi_k), biharmonic
    deriv_dir_to_bih: BandedMatrix     # (phi-dir'_j, phi-bih_k)
    deriv_bih_to_dir: BandedMatrix     # (phi-bih'_j, phi-dir_k)
    deriv_dir_to_cheb: ConstantTailMatrix  # (phi-dir'_j, T_k)

    @property
    def n_dir(self) -> int:
        return self.n_x - 1

    @property
    def n_bih(self) -> int:
        return self.n_x - 3

    def named(self, name: str):
        """Look up a matrix by its public name (for the debug dump)."""
        try:
            return getattr(self, name)
        except AttributeError:
            raise KeyError(name) from None


def _c_vec(n_modes: int, n_x: int, family: PointFamily, shift: int = 0) -> np.ndarray:
    """Quadrature coefficients c_{k+shift}; c differs at the highest mode on GL."""
    idx = np.arange(n_modes) + shift
    c = np.ones(n_modes)
    c[idx == 0] = 2.0
    if family is PointFamily.GAUSS_LOBATTO:
        c[idx == n_x] = 2.0
    return c


@lru_cache(maxsize=8)
def assemble(n_x: int, family: PointFamily) -> MatrixSet:
    """Assemble every 1-D matrix for resolution ``n_x``."""
    if n_x < 8:
        raise ValueError(f"n_x must be >= 8, got {n_x}")
    nd, nb = n_x - 1, n_x - 3
    pi = np.pi

    # masses (closed forms; the c-terms carry the Gauss-Lobatto
    # inexact-quadrature correction at the highest mode)
    mass_cheb = _c_vec(n_x + 1, n_x, family) * pi / 2

    k = np.arange(nd, dtype=float)
    bd0 = (_c_vec(nd, n_x, family) + _c_vec(nd, n_x, family, 2)) * pi / 2
    bd2 = np.full(nd - 2, -pi / 2)
    mass_dir = BandedMatrix((nd, nd), (-2, 0, 2), (bd2, bd0, bd2))

    k = np.arange(nb, dtype=float)
    bb0 = pi / 2 * (_c_vec(nb, n_x, family)
                    + 4 * ((k + 2) / (k + 3)) ** 2
                    + _c_vec(nb, n_x, family, 4) * ((k + 1) / (k + 3)) ** 2)
    bb2 = -pi * ((k + 2) / (k + 3)
                 + (k + 4) * (k + 1) / ((k + 5) * (k + 3)))[:nb - 2]
    bb4 = (pi / 2 * (k + 1) / (k + 3))[:nb - 4]
    mass_bih = BandedMatrix((nb, nb), (-4, -2, 0, 2, 4), (bb4, bb2, bb0, bb2, bb4))

    m0 = pi / 2 * (_c_vec(nb, n_x, family) + 2 * (k + 2) / (k + 3))
    m2 = -(pi / 2) * (2 * (k + 2) / (k + 3)
                      + _c_vec(nb, n_x, family, 4) * (k + 1) / (k + 3))
    m2 = m2[:min(nb, nd - 2)]
    m4 = (pi / 2 * (k + 1) / (k + 3))[:min(nb, nd - 4)]
    msub2 = np.full(nb - 2, -pi / 2)
    mixed_mass = BandedMatrix((nb, nd), (-2, 0, 2, 4), (msub2, m0, m2, m4))

    # stiffness matrices by exact coefficient-space quadrature; the
    # Dirichlet one is upper triangular with a constant row tail
    (ad0, ad2) = _deriv_product_diagonals(Space.DIRICHLET, Space.DIRICHLET, 2,
                                          nd, nd, (0, 2))
    tail = np.zeros(nd)
    tail[:nd - 2] = -ad2
    stiff_dir = ConstantTailMatrix(
        BandedMatrix((nd, nd), (0,), (-ad0,)), tail, 2)

    ab = _deriv_product_diagonals(Space.BIHARMONIC, Space.BIHARMONIC, 2,
                                  nb, nb, (-2, 0, 2))
    stiff_bih = BandedMatrix((nb, nb), (-2, 0, 2), tuple(-d for d in ab))

    (q0,) = _deriv_product_diagonals(Space.BIHARMONIC, Space.BIHARMONIC, 4,
                                     nb, nb, (0,))
    p, q, r, s = tail_factors(nb)
    fourth_bih = Rank2TailMatrix(q0, p, q, r, s)

    # first-derivative couplings (closed forms, family independent)
    k = np.arange(nb, dtype=float)
    ct_m1 = (-pi * (k + 1))[1:]
    ct_p1 = (2 * pi * (k + 1))[:min(nb, nd - 1)]
    ct_p3 = (-pi * (k + 1))[:min(nb, nd - 3)]
    deriv_dir_to_bih = BandedMatrix((nb, nd), (-1, 1, 3), (ct_m1, ct_p1, ct_p3))

    k = np.arange(nd, dtype=float)
    cb_m3 = (pi * (k - 2) * (k + 1) / np.where(k > 0, k, 1))[3:]
    cb_m1 = (-2 * pi * (k + 1) ** 2 / (k + 2))[1:min(nd, nb + 1)]
    cb_p1 = (pi * (k + 1))[:min(nd, nb - 1)]
    deriv_bih_to_dir = BandedMatrix((nd, nb), (-3, -1, 1), (cb_m3, cb_m1, cb_p1))

    k = np.arange(n_x + 1, dtype=float)
    c_m1 = (-pi * (k + 1))[1:nd + 1]
    deriv_dir_to_cheb = ConstantTailMatrix(
        BandedMatrix((n_x + 1, nd), (-1,), (c_m1,)),
        np.full(n_x + 1, -2 * pi), 1)

    return MatrixSet(n_x, family, mass_cheb, mass_dir, mass_bih, mixed_mass,
                     stiff_dir, stiff_bih, fourth_bih,
                     deriv_dir_to_bih, deriv_bih_to_dir, deriv_dir_to_cheb)


def dense_oracle(row_space: Space, col_space: Space, derivative_order: int,
                 n_x: int, family: PointFamily) -> np.ndarray:
    """Brute-force quadrature of ``(phi-col_j^{(d)}, phi-row_k)_sigma``.

    O(n^3); test use only.
    """
    if derivative_order > 4:
        raise ValueError("derivative order must be <= 4")
    x = chebyshev_points(n_x, family)
    w = quadrature_weights(n_x, family)
    nrow = n_x + 1 - row_space.mode_drop
    ncol = n_x + 1 - col_space.mode_drop
    out = np.zeros((nrow, ncol))
    rows = [_cheb.chebval(x, _basis_coeffs(kk, row_space)) * w for kk in range(nrow)]
    for j in range(ncol):
        c = _basis_coeffs(j, col_space)
        for _ in range(derivative_order):
            c = _cheb.chebder(c)
        col = _cheb.chebval(x, c)
        for kk in range(nrow):
            out[kk, j] = np.dot(rows[kk], col)
    return out
