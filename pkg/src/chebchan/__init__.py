"""Spectral-Galerkin channel flow solver with Shen-Chebyshev bases.

Subpackages:

* :mod:`chebchan.mesh` - collocation points, weights, wavenumber grids
* :mod:`chebchan.transforms` - fast forward/inverse transforms
* :mod:`chebchan.matrices` - 1-D scalar-product matrix assembly
* :mod:`chebchan.solvers` - O(N) Helmholtz and biharmonic direct solvers
* :mod:`chebchan.stepper` - semi-implicit channel-flow time integrator
* :mod:`chebchan.verify` - verification experiments and reports
* :mod:`chebchan.cli` - command-line interface
"""

from .mesh import Mesh, PointFamily, Space, build_mesh, wavenumber_grid

__version__ = "0.1.0"

__all__ = [
    "Mesh",
    "PointFamily",
    "Space",
    "build_mesh",
    "wavenumber_grid",
    "__version__",
]
