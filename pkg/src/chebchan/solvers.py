"""Direct O(N) solvers for the implicit Helmholtz and biharmonic systems.

The time-discretized operators are, per horizontal wavenumber pair with
``z2 = m^2 + n^2`` (scaled):

* Helmholtz (wall-normal vorticity, Dirichlet space)::

      H = (nu*dt/2) * K + (1 + nu*dt*z2/2) * B

  with ``K`` the positive stiffness matrix ``-(phi''_j, phi_k)`` and ``B``
  the Dirichlet mass matrix.

* Biharmonic (wall-normal velocity, clamped space)::

      H = xi0*Q + xi1*A + xi2*B
      xi0 = -nu*dt/2,  xi1 = 1 + nu*dt*z2,  xi2 = -(2*z2 + nu*dt*z2**2)/2

  where ``Q`` is the fourth-derivative matrix, ``A = (phi''_j, phi_k)``
  the (negative-definite) second-derivative matrix and ``B`` the mass
  matrix.

Both operators decouple into even and odd mode subsets.  Per parity the
Helmholtz operator is upper Hessenberg with constant row tails, and the
biharmonic operator is banded except for a rank-2 upper tail
``xi0*(p_k q_j + r_k s_j)``; both structures survive unpivoted Gaussian
elimination, giving LU factors with O(N) storage (one resp. two
subdiagonals in L, and a compressed U: two stored superdiagonals plus a
constant tail for Helmholtz, or tail coefficient vectors ``a_k, b_k``
recursively updated for the biharmonic case).  Factorization and solve
are both O(N) per wavenumber pair; every routine here is vectorized over
an arbitrary batch of ``z2`` values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrices import MatrixSet, assemble, tail_factors
from .mesh import PointFamily

__all__ = [
    "HelmholtzLU",
    "BiharmonicLU",
    "build_helmholtz",
    "build_biharmonic",
    "dense_helmholtz",
    "dense_biharmonic",
    "lu_nopivot",
    "solve_field",
]

_PIVOT_FLOOR = 1e-300


class ZeroPivotError(ArithmeticError):
    """Raised when unpivoted elimination meets a vanishing pivot."""


def _check_pivot(d: np.ndarray, what: str, row: int):
    if np.any(np.abs(d) < _PIVOT_FLOOR):
        raise ZeroPivotError(
            f"{what} factorization hit a near-zero pivot at row {row}")


def helmholtz_coefficients(nu: float, dt: float, z2: np.ndarray):
    """(stiffness, mass) prefactors of the implicit Helmholtz operator."""
    return nu * dt / 2, 1 + nu * dt * np.asarray(z2, dtype=float) / 2


def biharmonic_coefficients(nu: float, dt: float, z2: np.ndarray):
    """(xi0, xi1, xi2) prefactors of the implicit biharmonic operator."""
    z2 = np.asarray(z2, dtype=float)
    return -nu * dt / 2, 1 + nu * dt * z2, -(2 * z2 + nu * dt * z2 ** 2) / 2


@dataclass
class HelmholtzLU:
    """Compressed unpivoted LU of the Helmholtz operator, batched over z2.

    Per parity: ``low`` is the single subdiagonal of L; ``d``/``e`` the
    main and first stored (stride-2) superdiagonal of U; ``tail`` the
    constant value of U on every column from four to the right onwards.
    All arrays have shape (rows_of_parity, batch).
    """

    n_x: int
    family: PointFamily
    z2_shape: tuple
    low: list
    d: list
    e: list
    tail: list

    @property
    def n_modes(self) -> int:
        return self.n_x - 1

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve H x = rhs; rhs shape (n_modes, *z2_shape)."""
        if rhs.shape != (self.n_modes,) + self.z2_shape:
            raise ValueError(f"rhs shape {rhs.shape} does not match "
                             f"{(self.n_modes,) + self.z2_shape}")
        flat = rhs.reshape(self.n_modes, -1)
        out = np.empty_like(flat, dtype=np.result_type(flat, float))
        for par in (0, 1):
            out[par::2] = self._solve_parity(par, flat[par::2])
        return out.reshape(rhs.shape)

    def _solve_parity(self, par: int, b: np.ndarray) -> np.ndarray:
        low, d, e, tail = self.low[par], self.d[par], self.e[par], self.tail[par]
        n = b.shape[0]
        y = np.empty_like(b, dtype=np.result_type(b, float))
        y[0] = b[0]
        for i in range(1, n):
            y[i] = b[i] - low[i - 1] * y[i - 1]
        x = np.empty_like(y)
        x[n - 1] = y[n - 1] / d[n - 1]
        if n > 1:
            x[n - 2] = (y[n - 2] - e[n - 2] * x[n - 1]) / d[n - 2]
        run = np.zeros_like(x[0])
        for i in range(n - 3, -1, -1):
            run = run + x[i + 2]
            x[i] = (y[i] - e[i] * x[i + 1] - tail[i] * run) / d[i]
        return x


@dataclass
class BiharmonicLU:
    """Compressed unpivoted LU of the biharmonic operator, batched over z2.

    Per parity: ``low2``/``low4`` are the two subdiagonals of L (offsets
    one and two subsystem rows); ``d``/``e``/``f`` the three stored
    superdiagonals of U; ``a``/``b`` the recursively updated row factors
    of the rank-2 tail ``xi0*(a_k q_j + b_k s_j)`` holding for columns six
    or more to the right.  Seven stored vectors in total.
    """

    n_x: int
    family: PointFamily
    z2_shape: tuple
    xi0: float
    low2: list
    low4: list
    d: list
    e: list
    f: list
    a: list
    b: list
    q: np.ndarray
    s: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.n_x - 3

    def storage_vectors(self) -> int:
        """Stored O(N)-length vectors per batch element (excludes q, s)."""
        return 7

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if rhs.shape != (self.n_modes,) + self.z2_shape:
            raise ValueError(f"rhs shape {rhs.shape} does not match "
                             f"{(self.n_modes,) + self.z2_shape}")
        flat = rhs.reshape(self.n_modes, -1)
        out = np.empty_like(flat, dtype=np.result_type(flat, float))
        for par in (0, 1):
            out[par::2] = self._solve_parity(par, flat[par::2])
        return out.reshape(rhs.shape)

    def _solve_parity(self, par: int, rhs: np.ndarray) -> np.ndarray:
        low2, low4 = self.low2[par], self.low4[par]
        d, e, f = self.d[par], self.e[par], self.f[par]
        a, b = self.a[par], self.b[par]
        q, s = self.q[par::2], self.s[par::2]
        n = rhs.shape[0]
        y = np.empty_like(rhs, dtype=np.result_type(rhs, float))
        y[0] = rhs[0]
        if n > 1:
            y[1] = rhs[1] - low2[0] * y[0]
        for i in range(2, n):
            y[i] = rhs[i] - low2[i - 1] * y[i - 1] - low4[i - 2] * y[i - 2]
        x = np.empty_like(y)
        sum_q = np.zeros_like(y[0])
        sum_s = np.zeros_like(y[0])
        for i in range(n - 1, -1, -1):
            acc = y[i]
            if i + 1 < n:
                acc = acc - e[i] * x[i + 1]
            if i + 2 < n:
                acc = acc - f[i] * x[i + 2]
            if i + 3 < n:
                sum_q = sum_q + q[i + 3] * x[i + 3]
                sum_s = sum_s + s[i + 3] * x[i + 3]
                acc = acc - self.xi0 * (a[i] * sum_q + b[i] * sum_s)
            x[i] = acc / d[i]
        return x


def build_helmholtz(mats: MatrixSet, nu: float, dt: float,
                    z2: np.ndarray) -> HelmholtzLU:
    """Factor the Helmholtz operator for every z2 in the batch."""
    z2 = np.asarray(z2, dtype=float)
    ca, cb = helmholtz_coefficients(nu, dt, z2)
    cb_flat = np.atleast_1d(cb).reshape(-1)

    nd = mats.n_dir
    stiff_diag = mats.stiff_dir.banded.diagonal(0)
    stiff_tail = mats.stiff_dir.tail
    mass_diag = mats.mass_dir.diagonal(0)
    mass_off = -np.pi / 2

    lows, ds, es, tails = [], [], [], []
    for par in (0, 1):
        k = np.arange(par, nd, 2)
        n = k.size
        h_diag = ca * stiff_diag[k][:, None] + cb_flat * mass_diag[k][:, None]
        h_tail = ca * stiff_tail[k][:, None] + np.zeros_like(cb_flat)
        h_super = h_tail.copy()
        n_super = len(range(par, nd - 2, 2))  # rows with a stored superdiagonal
        h_super[:n_super] += cb_flat * mass_off
        h_sub = np.broadcast_to(cb_flat * mass_off, (max(n - 1, 0), cb_flat.size))

        d = np.empty_like(h_diag)
        e = np.empty_like(h_diag)
        t = np.empty_like(h_diag)
        low = np.empty_like(h_sub)
        d[0], e[0], t[0] = h_diag[0], h_super[0], h_tail[0]
        _check_pivot(d[0], "Helmholtz", par)
        for i in range(1, n):
            low[i - 1] = h_sub[i - 1] / d[i - 1]
            d[i] = h_diag[i] - low[i - 1] * e[i - 1]
            e[i] = h_super[i] - low[i - 1] * t[i - 1]
            t[i] = h_tail[i] - low[i - 1] * t[i - 1]
            _check_pivot(d[i], "Helmholtz", 2 * i + par)
        lows.append(low)
        ds.append(d)
        es.append(e)
        tails.append(t)
    return HelmholtzLU(mats.n_x, mats.family, np.shape(z2), lows, ds, es, tails)


def _biharmonic_bands(mats: MatrixSet, xi0, xi1, xi2):
    """Banded entries of the biharmonic operator, batched over z2."""
    nb = mats.n_bih
    p, q, r, s = tail_factors(nb)
    q0 = mats.fourth_bih.diag
    ar_m2 = -mats.stiff_bih.diagonal(-2)
    ar_0 = -mats.stiff_bih.diagonal(0)
    ar_2 = -mats.stiff_bih.diagonal(2)
    bb0 = mats.mass_bih.diagonal(0)
    bb2 = mats.mass_bih.diagonal(2)
    bb4 = mats.mass_bih.diagonal(4)

    k = np.arange(nb)
    h = {}
    h["m4"] = xi2 * bb4[:, None]                                     # rows k>=4
    h["m2"] = xi1 * ar_m2[:, None] + xi2 * bb2[:, None]              # rows k>=2
    h["d0"] = xi0 * q0[:, None] + xi1 * ar_0[:, None] + xi2 * bb0[:, None]
    tail2 = p[:nb - 2] * q[2:] + r[:nb - 2] * s[2:]
    h["p2"] = xi0 * tail2[:, None] + np.zeros((nb - 2, np.size(xi1)))
    h["p2"][:len(ar_2)] += xi1 * ar_2[:, None]
    h["p2"][:len(bb2)] += xi2 * bb2[:, None]
    tail4 = p[:nb - 4] * q[4:] + r[:nb - 4] * s[4:]
    h["p4"] = xi0 * tail4[:, None] + np.zeros((nb - 4, np.size(xi1)))
    h["p4"][:len(bb4)] += xi2 * bb4[:, None]
    return h, p, q, r, s


def build_biharmonic(mats: MatrixSet, nu: float, dt: float,
                     z2: np.ndarray) -> BiharmonicLU:
    """Factor the biharmonic operator for every z2 in the batch."""
    z2 = np.asarray(z2, dtype=float)
    xi0, xi1, xi2 = biharmonic_coefficients(nu, dt, z2)
    xi1f = np.atleast_1d(xi1).reshape(-1)
    xi2f = np.atleast_1d(xi2).reshape(-1)
    nb = mats.n_bih
    h, p, q, r, s = _biharmonic_bands(mats, xi0, xi1f, xi2f)
    batch = xi1f.size

    low2s, low4s, ds, es, fs, avs, bvs = [], [], [], [], [], [], []
    for par in (0, 1):
        k = np.arange(par, nb, 2)
        n = k.size

        def band(name, offset):
            """H entry (k_i, k_i + 2*offset) for subsystem row i, or zeros."""
            out = np.zeros((n, batch))
            if offset >= 0:
                rows = k[k + 2 * offset <= nb - 1]
                idx = rows
            else:
                rows = k[k + 2 * offset >= 0]
                idx = rows + 2 * offset
            sel = (rows - par) // 2
            out[sel] = h[name][idx]
            return out

        hd = band("d0", 0)
        hp2 = band("p2", 1)
        hp4 = band("p4", 2)
        hm2 = band("m2", -1)
        hm4 = band("m4", -2)

        d = np.empty((n, batch))
        e = np.zeros((n, batch))
        f = np.zeros((n, batch))
        av = np.empty((n, batch))
        bv = np.empty((n, batch))
        low2 = np.zeros((max(n - 1, 0), batch))
        low4 = np.zeros((max(n - 2, 0), batch))

        for i in range(n):
            kk = k[i]
            if i >= 2:
                l4 = hm4[i] / d[i - 2]
                tmp = hm2[i] - l4 * e[i - 2]
                l2 = tmp / d[i - 1]
                low4[i - 2] = l4
                low2[i - 1] = l2
                u_m4_p2 = xi0 * (av[i - 2] * q[kk + 2] + bv[i - 2] * s[kk + 2]) \
                    if kk + 2 <= nb - 1 else 0.0
                u_m4_p4 = xi0 * (av[i - 2] * q[kk + 4] + bv[i - 2] * s[kk + 4]) \
                    if kk + 4 <= nb - 1 else 0.0
                u_m2_p4 = xi0 * (av[i - 1] * q[kk + 4] + bv[i - 1] * s[kk + 4]) \
                    if kk + 4 <= nb - 1 else 0.0
                d[i] = hd[i] - l4 * f[i - 2] - l2 * e[i - 1]
                e[i] = hp2[i] - l4 * u_m4_p2 - l2 * f[i - 1]
                f[i] = hp4[i] - l4 * u_m4_p4 - l2 * u_m2_p4
                av[i] = p[kk] - l2 * av[i - 1] - l4 * av[i - 2]
                bv[i] = r[kk] - l2 * bv[i - 1] - l4 * bv[i - 2]
            elif i == 1:
                l2 = hm2[i] / d[i - 1]
                low2[i - 1] = l2
                u_m2_p4 = xi0 * (av[i - 1] * q[kk + 4] + bv[i - 1] * s[kk + 4]) \
                    if kk + 4 <= nb - 1 else 0.0
                d[i] = hd[i] - l2 * e[i - 1]
                e[i] = hp2[i] - l2 * f[i - 1]
                f[i] = hp4[i] - l2 * u_m2_p4
                av[i] = p[kk] - l2 * av[i - 1]
                bv[i] = r[kk] - l2 * bv[i - 1]
            else:
                d[i], e[i], f[i] = hd[i], hp2[i], hp4[i]
                av[i], bv[i] = p[kk], r[kk]
            _check_pivot(d[i], "biharmonic", kk)
        low2s.append(low2)
        low4s.append(low4)
        ds.append(d)
        es.append(e)
        fs.append(f)
        avs.append(av)
        bvs.append(bv)
    return BiharmonicLU(mats.n_x, mats.family, np.shape(z2), float(xi0),
                        low2s, low4s, ds, es, fs, avs, bvs, q, s)


# ----------------------------------------------------------------------
# dense references (testing)

def dense_helmholtz(mats: MatrixSet, nu: float, dt: float, z2: float) -> np.ndarray:
    ca, cb = helmholtz_coefficients(nu, dt, float(z2))
    return ca * mats.stiff_dir.dense() + cb * mats.mass_dir.dense()


def dense_biharmonic(mats: MatrixSet, nu: float, dt: float, z2: float) -> np.ndarray:
    xi0, xi1, xi2 = biharmonic_coefficients(nu, dt, float(z2))
    return (xi0 * mats.fourth_bih.dense() - xi1 * mats.stiff_bih.dense()
            + xi2 * mats.mass_bih.dense())


def lu_nopivot(a: np.ndarray):
    """Dense unpivoted LU (reference for the compressed factorizations)."""
    n = a.shape[0]
    u = a.astype(float).copy()
    low = np.eye(n)
    for i in range(n - 1):
        piv = u[i, i]
        if abs(piv) < _PIVOT_FLOOR:
            raise ZeroPivotError(f"dense elimination pivot ~0 at row {i}")
        mult = u[i + 1:, i] / piv
        low[i + 1:, i] = mult
        u[i + 1:] -= mult[:, None] * u[i]
    return low, u


def solve_field(lu, field):
    """Apply the per-wavenumber 1-D solve to a whole spectral field."""
    from .transforms import SpectralField

    out = lu.solve(field.data)
    return SpectralField(out, field.grid, field.mesh)
