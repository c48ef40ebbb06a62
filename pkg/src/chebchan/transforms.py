"""Fast transforms between physical space and the Shen/Chebyshev spaces.

The wall-normal direction uses discrete cosine transforms (type II/III on
Gauss points, type I on Gauss-Lobatto points); the two periodic directions
use standard FFTs with a Hermitian half spectrum in z.  The forward
Fourier transform is an unnormalized sum and the inverse carries the
1/(n_y n_z) factor, so coefficients of a plane wave of unit amplitude come
out as n_y*n_z.

The forward route for the boundary-adapted spaces is scalar product
followed by a banded mass-matrix solve; the Chebyshev space needs only a
diagonal rescale.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy.linalg import cho_solve_banded, cholesky_banded

from .matrices import assemble
from .mesh import Mesh, PointFamily, Space, WavenumberGrid, wavenumber_grid

__all__ = [
    "PhysicalField",
    "SpectralField",
    "chebyshev_scalar",
    "shen_scalar",
    "shen_expand",
    "chebyshev_evaluate",
    "mass_solve",
    "forward_transform",
    "inverse_transform",
]


@dataclass
class PhysicalField:
    """Real samples of a scalar on the collocation mesh."""

    data: np.ndarray
    mesh: Mesh

    def __post_init__(self):
        if self.data.shape != self.mesh.shape:
            raise ValueError(
                f"field shape {self.data.shape} does not match mesh {self.mesh.shape}")


@dataclass
class SpectralField:
    """Complex expansion coefficients on a wavenumber grid.

    Shape is (l_max+1, n_y, n_z//2+1); the z half-spectrum assumes a real
    physical field.
    """

    data: np.ndarray
    grid: WavenumberGrid
    mesh: Mesh

    def __post_init__(self):
        expected = (self.grid.n_modes,) + self.mesh.spectral_shape_yz
        if self.data.shape != expected:
            raise ValueError(
                f"coefficient shape {self.data.shape}, expected {expected}")

    def copy(self) -> "SpectralField":
        return SpectralField(self.data.copy(), self.grid, self.mesh)

    def zeros_like(self) -> "SpectralField":
        return SpectralField(np.zeros_like(self.data), self.grid, self.mesh)


# ----------------------------------------------------------------------
# one-dimensional building blocks (operate along axis 0, real or complex)

def chebyshev_scalar(values: np.ndarray, family: PointFamily) -> np.ndarray:
    """Weighted scalar products (f, T_k) for k = 0..n_x via fast DCT."""
    n_pts = values.shape[0]
    if family is PointFamily.GAUSS:
        return sfft.dct(values, type=2, axis=0) * (np.pi / (2 * n_pts))
    return sfft.dct(values, type=1, axis=0) * (np.pi / (2 * (n_pts - 1)))


def shen_scalar(values: np.ndarray, family: PointFamily,
                space: Space) -> np.ndarray:
    """Scalar products against the basis of ``space``.

    For the Chebyshev space this instead returns the interpolation
    coefficients directly (the mass matrix is diagonal, so the rescale is
    folded in here).
    """
    w = chebyshev_scalar(values, family)
    n_x = values.shape[0] - 1
    if space is Space.CHEBYSHEV:
        y = w * (2.0 / np.pi)
        y[0] /= 2
        if family is PointFamily.GAUSS_LOBATTO:
            y[n_x] /= 2
        return y
    if space is Space.DIRICHLET:
        return w[:n_x - 1] - w[2:n_x + 1]
    k = np.arange(n_x - 3, dtype=float)
    c2 = (2 * (k + 2) / (k + 3)).reshape((-1,) + (1,) * (w.ndim - 1))
    c4 = ((k + 1) / (k + 3)).reshape((-1,) + (1,) * (w.ndim - 1))
    return w[:n_x - 3] - c2 * w[2:n_x - 1] + c4 * w[4:n_x + 1]


def shen_expand(coeffs: np.ndarray, space: Space, n_x: int) -> np.ndarray:
    """Expand basis coefficients of ``space`` into plain Chebyshev ones."""
    out = np.zeros((n_x + 1,) + coeffs.shape[1:], dtype=coeffs.dtype)
    n = coeffs.shape[0]
    out[:n] = coeffs
    if space is Space.DIRICHLET:
        out[2:n + 2] -= coeffs
    elif space is Space.BIHARMONIC:
        k = np.arange(n, dtype=float)
        c2 = (2 * (k + 2) / (k + 3)).reshape((-1,) + (1,) * (coeffs.ndim - 1))
        c4 = ((k + 1) / (k + 3)).reshape((-1,) + (1,) * (coeffs.ndim - 1))
        out[2:n + 2] -= c2 * coeffs
        out[4:n + 4] += c4 * coeffs
    return out


def chebyshev_evaluate(coeffs: np.ndarray, family: PointFamily) -> np.ndarray:
    """Evaluate a Chebyshev series on the collocation points (fast DCT)."""
    if family is PointFamily.GAUSS:
        return sfft.dct(coeffs, type=3, axis=0) / 2 + coeffs[0] / 2
    n_x = coeffs.shape[0] - 1
    y = sfft.dct(coeffs, type=1, axis=0) / 2 + coeffs[0] / 2
    signs = ((-1.0) ** np.arange(n_x + 1)).reshape(
        (-1,) + (1,) * (coeffs.ndim - 1))
    return y + signs * coeffs[n_x] / 2


# ----------------------------------------------------------------------
# banded mass solves (stride-2 parity split, Cholesky)

@lru_cache(maxsize=16)
def _mass_cholesky(n_x: int, family: PointFamily, space: Space):
    """Per-parity banded Cholesky factors of the mass matrix."""
    mats = assemble(n_x, family)
    if space is Space.DIRICHLET:
        full, nband = mats.mass_dir, 1
    else:
        full, nband = mats.mass_bih, 2
    dense = full.dense()
    factors = []
    for par in (0, 1):
        sub = dense[par::2, par::2]
        m = sub.shape[0]
        ab = np.zeros((nband + 1, m))
        for b in range(nband + 1):
            ab[nband - b, b:] = np.diag(sub, b)
        factors.append(cholesky_banded(ab, lower=False))
    return tuple(factors)


def mass_solve(scalar: np.ndarray, space: Space, n_x: int,
               family: PointFamily) -> np.ndarray:
    """Solve B y = scalar products along axis 0 for a banded mass matrix."""
    if space is Space.CHEBYSHEV:
        raise ValueError("Chebyshev mass solve is a rescale; see shen_scalar")
    factors = _mass_cholesky(n_x, family, space)
    out = np.empty_like(scalar, dtype=np.result_type(scalar, float))
    for par in (0, 1):
        rhs = scalar[par::2]
        flat = rhs.reshape(rhs.shape[0], -1)
        sol = cho_solve_banded((factors[par], False), flat)
        out[par::2] = sol.reshape(rhs.shape)
    return out


# ----------------------------------------------------------------------
# full 3-D transforms

def forward_transform(field: PhysicalField, space: Space) -> SpectralField:
    """Physical samples -> expansion coefficients in ``space``."""
    mesh = field.mesh
    fourier = sfft.rfftn(field.data, axes=(1, 2))
    scal = shen_scalar(fourier, mesh.family, space)
    if space is not Space.CHEBYSHEV:
        scal = mass_solve(scal, space, mesh.n_x, mesh.family)
    return SpectralField(scal, wavenumber_grid(mesh, space), mesh)


def forward_scalar_product(field: PhysicalField, space: Space) -> SpectralField:
    """Like `forward_transform` but stops before the mass solve."""
    mesh = field.mesh
    fourier = sfft.rfftn(field.data, axes=(1, 2))
    scal = shen_scalar(fourier, mesh.family, space)
    return SpectralField(scal, wavenumber_grid(mesh, space), mesh)


def inverse_transform(coeffs: SpectralField) -> PhysicalField:
    """Expansion coefficients -> physical samples (exact inverse)."""
    mesh = coeffs.mesh
    cheb = shen_expand(coeffs.data, coeffs.grid.space, mesh.n_x)
    lines = chebyshev_evaluate(cheb, mesh.family)
    data = sfft.irfftn(lines, s=(mesh.n_y, mesh.n_z), axes=(1, 2))
    return PhysicalField(data, mesh)
