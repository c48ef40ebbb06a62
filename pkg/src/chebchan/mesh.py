"""Collocation mesh, quadrature weights and wavenumber index sets.

The wall-normal direction uses Chebyshev points on [-1, 1] (walls at the
endpoints), the two periodic directions use uniform grids of lengths
``l_y`` and ``l_z``.  Three spectral spaces live on the wall-normal axis:

* ``Space.CHEBYSHEV`` - plain Chebyshev polynomials, modes 0..n_x
* ``Space.DIRICHLET`` - combinations vanishing at both walls, modes 0..n_x-2
* ``Space.BIHARMONIC`` - combinations with value and slope zero at both
  walls, modes 0..n_x-4
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PointFamily",
    "Space",
    "Mesh",
    "WavenumberGrid",
    "build_mesh",
    "wavenumber_grid",
]


class PointFamily(enum.Enum):
    """Chebyshev collocation point family."""

    GAUSS = "chebyshev-gauss"            # strictly interior points
    GAUSS_LOBATTO = "chebyshev-gauss-lobatto"  # includes the walls


class Space(enum.Enum):
    """Wall-normal function space variant."""

    CHEBYSHEV = "chebyshev"
    DIRICHLET = "dirichlet"
    BIHARMONIC = "biharmonic"

    @property
    def mode_drop(self) -> int:
        return {"chebyshev": 0, "dirichlet": 2, "biharmonic": 4}[self.value]


@dataclass(frozen=True)
class Mesh:
    """Computational mesh for the doubly periodic channel.

    ``n_x`` is the number of wall-normal intervals (``n_x + 1`` points),
    ``n_y``/``n_z`` the periodic interval counts.  ``x`` is stored in
    cosine (strictly decreasing) order and ``w`` holds the quadrature
    weights of the discrete weighted scalar product.
    """

    n_x: int
    n_y: int
    n_z: int
    l_y: float
    l_z: float
    family: PointFamily
    x: np.ndarray = field(repr=False, compare=False, default=None)
    w: np.ndarray = field(repr=False, compare=False, default=None)

    def __hash__(self):
        return hash((self.n_x, self.n_y, self.n_z, self.l_y, self.l_z, self.family))

    @property
    def shape(self) -> tuple[int, int, int]:
        """Physical-space array shape."""
        return (self.n_x + 1, self.n_y, self.n_z)

    @property
    def spectral_shape_yz(self) -> tuple[int, int]:
        """Periodic-direction shape of the Hermitian half spectrum."""
        return (self.n_y, self.n_z // 2 + 1)


@dataclass(frozen=True)
class WavenumberGrid:
    """Scaled wavenumbers and mode range for one spectral space."""

    space: Space
    l_max: int
    m_scaled: np.ndarray = field(repr=False, compare=False)
    n_scaled: np.ndarray = field(repr=False, compare=False)

    @property
    def n_modes(self) -> int:
        return self.l_max + 1

    def z2(self) -> np.ndarray:
        """Squared horizontal wavenumber magnitude, shape (n_y, n_z//2+1)."""
        return self.m_scaled[:, None] ** 2 + self.n_scaled[None, :] ** 2


def chebyshev_points(n_x: int, family: PointFamily) -> np.ndarray:
    if family is PointFamily.GAUSS_LOBATTO:
        return np.cos(np.pi * np.arange(n_x + 1) / n_x)
    return np.cos((2 * np.arange(n_x + 1) + 1) * np.pi / (2 * n_x + 2))


def quadrature_weights(n_x: int, family: PointFamily) -> np.ndarray:
    if family is PointFamily.GAUSS_LOBATTO:
        w = np.full(n_x + 1, np.pi / n_x)
        w[0] = w[-1] = np.pi / (2 * n_x)
        return w
    return np.full(n_x + 1, np.pi / (n_x + 1))


def build_mesh(n_x: int, n_y: int, n_z: int, l_y: float, l_z: float,
               family: PointFamily = PointFamily.GAUSS) -> Mesh:
    """Build the channel mesh; rejects sizes the bases cannot support."""
    if n_x < 8:
        raise ValueError(f"n_x must be >= 8, got {n_x}")
    if n_x % 2 != 0:
        raise ValueError(f"n_x must be even, got {n_x}")
    if n_y < 2 or n_y % 2 != 0:
        raise ValueError(f"n_y must be even and >= 2, got {n_y}")
    if n_z < 2 or n_z % 2 != 0:
        raise ValueError(f"n_z must be even and >= 2, got {n_z}")
    if l_y <= 0 or l_z <= 0:
        raise ValueError("periodic lengths must be positive")
    x = chebyshev_points(n_x, family)
    w = quadrature_weights(n_x, family)
    return Mesh(n_x, n_y, n_z, float(l_y), float(l_z), family, x, w)


def wavenumber_grid(mesh: Mesh, space: Space) -> WavenumberGrid:
    """Scaled wavenumbers in standard FFT layout (half spectrum in z)."""
    m = np.fft.fftfreq(mesh.n_y, 1.0 / mesh.n_y)
    n = np.fft.rfftfreq(mesh.n_z, 1.0 / mesh.n_z)
    return WavenumberGrid(
        space=space,
        l_max=mesh.n_x - space.mode_drop,
        m_scaled=2 * np.pi * m / mesh.l_y,
        n_scaled=2 * np.pi * n / mesh.l_z,
    )
