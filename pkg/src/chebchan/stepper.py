"""Semi-implicit time integrator for incompressible channel flow.

The scheme evolves the wall-normal velocity ``u`` (clamped/biharmonic
space) and wall-normal vorticity ``g`` (Dirichlet space):

    d/dt lap(u) = h_u + nu*lap^2(u)
    d/dt g      = h_g + nu*lap(g)

with Crank-Nicolson for the linear terms and second-order
Adams-Bashforth for the nonlinear terms ``h_u``/``h_g`` built from
``H = u x omega``.  The horizontal velocities v (streamwise) and w
(spanwise) are recovered algebraically from the divergence variable
``f = dv/dy + dw/dz`` and ``g`` for every wavenumber pair except the
mean mode (m = n = 0), where the y/z momentum equations are solved
directly; the streamwise mean equation carries the driving pressure
gradient ``beta``.

Coordinates: x wall-normal in [-1, 1], y streamwise (period l_y),
z spanwise (period l_z).
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, replace

import numpy as np

from .matrices import MatrixSet, assemble
from .mesh import Mesh, PointFamily, Space, build_mesh, wavenumber_grid
from .solvers import (biharmonic_coefficients, build_biharmonic,
                      build_helmholtz, helmholtz_coefficients)
from .transforms import (PhysicalField, SpectralField, forward_transform,
                         inverse_transform, mass_solve)

__all__ = [
    "Forcing",
    "StepperConfig",
    "FlowState",
    "ChannelStepper",
    "save_checkpoint",
    "load_checkpoint",
]


class Forcing(enum.Enum):
    FIXED_BETA = "fixed-beta"
    CONSTANT_FLUX = "constant-flux"


@dataclass(frozen=True)
class StepperConfig:
    """Physical and numerical parameters of a channel run."""

    nu: float
    dt: float
    forcing: Forcing = Forcing.FIXED_BETA
    beta: float = 0.0            # fixed driving gradient (FIXED_BETA)
    target_flux: float = 0.0     # bulk flux setpoint (CONSTANT_FLUX)
    dealias: bool = True

    def __post_init__(self):
        if self.nu <= 0 or self.dt <= 0:
            raise ValueError("nu and dt must be positive")


@dataclass
class FlowState:
    """Spectral state of the flow at one time level."""

    u_hat: SpectralField   # wall-normal velocity, biharmonic space
    v_hat: SpectralField   # streamwise velocity, Dirichlet space
    w_hat: SpectralField   # spanwise velocity, Dirichlet space
    g_hat: SpectralField   # wall-normal vorticity, Dirichlet space
    h_curr: tuple          # latest nonlinear term (3 Dirichlet fields)
    h_prev: tuple          # previous nonlinear term
    beta: float
    t: float
    kappa: int


def dirichlet_integral_weights(n_modes: int) -> np.ndarray:
    """Exact integrals of the Dirichlet basis functions over [-1, 1]."""
    ell = np.arange(n_modes)
    out = np.zeros(n_modes)
    even = ell % 2 == 0
    le = ell[even].astype(float)
    out[even] = 2 / (1 - le ** 2) - 2 / (1 - (le + 2) ** 2)
    return out


def chebyshev_integral_weights(n_modes: int) -> np.ndarray:
    """Exact integrals of T_l over [-1, 1] (zero for odd l)."""
    ell = np.arange(n_modes)
    out = np.zeros(n_modes)
    even = ell % 2 == 0
    out[even] = 2 / (1 - ell[even].astype(float) ** 2)
    return out


class ChannelStepper:
    """Prebuilt operators and transforms for stepping one channel mesh."""

    def __init__(self, mesh: Mesh, config: StepperConfig):
        self.mesh = mesh
        self.config = config
        self.mats: MatrixSet = assemble(mesh.n_x, mesh.family)
        self.grid_dir = wavenumber_grid(mesh, Space.DIRICHLET)
        self.grid_bih = wavenumber_grid(mesh, Space.BIHARMONIC)
        self.m = self.grid_dir.m_scaled[:, None]
        self.n = self.grid_dir.n_scaled[None, :]
        self.z2 = self.grid_dir.z2()
        nu, dt = config.nu, config.dt
        self.helmholtz = build_helmholtz(self.mats, nu, dt, self.z2)
        self.biharmonic = build_biharmonic(self.mats, nu, dt, self.z2)
        self.helmholtz_mean = build_helmholtz(self.mats, nu, dt,
                                              np.zeros(1))
        self.mask = self._spectral_mask()
        # flux bookkeeping for the mean streamwise mode
        self.flux_weights = dirichlet_integral_weights(self.mats.n_dir)
        e0 = np.zeros((self.mats.n_dir, 1))
        e0[0, 0] = np.pi * mesh.n_y * mesh.n_z
        # response of the mean profile to a unit beta increment
        self.beta_response = -dt * self.helmholtz_mean.solve(e0)[:, 0]
        self.flux_sensitivity = float(
            self.flux_weights @ self.beta_response) / (mesh.n_y * mesh.n_z)

    # -- masks ----------------------------------------------------------

    def _spectral_mask(self) -> np.ndarray:
        """Dealiasing / Nyquist mask over the (m, n) plane."""
        n_y, n_z = self.mesh.n_y, self.mesh.n_z
        m_idx = np.fft.fftfreq(n_y, 1.0 / n_y).astype(int)[:, None]
        n_idx = np.arange(n_z // 2 + 1)[None, :]
        keep = (np.abs(m_idx) != n_y // 2) & (n_idx != n_z // 2)
        if self.config.dealias:
            keep = keep & (np.abs(m_idx) < max(n_y // 3, 1)) \
                        & (n_idx < max(n_z // 3, 1))
        return keep

    def apply_mask(self, field: SpectralField) -> SpectralField:
        field.data *= self.mask
        return field

    # -- nonlinear term -------------------------------------------------

    def compute_nonlinear(self, state: FlowState) -> tuple:
        """Dirichlet-space coefficients of H = u x omega."""
        mesh = self.mesh
        u_hat, v_hat, w_hat, g_hat = (state.u_hat, state.v_hat,
                                      state.w_hat, state.g_hat)

        # wall-normal derivatives of v, w projected to Chebyshev space
        mass_inv = 1.0 / self.mats.mass_cheb
        grid_full = wavenumber_grid(mesh, Space.CHEBYSHEV)

        def ddx(field):
            c = self.mats.deriv_dir_to_cheb.apply(field.data)
            c *= mass_inv.reshape(-1, 1, 1)
            return SpectralField(c, grid_full, mesh)

        u = inverse_transform(u_hat).data
        v = inverse_transform(v_hat).data
        w = inverse_transform(w_hat).data
        om_x = inverse_transform(g_hat).data
        dv_dx = inverse_transform(ddx(v_hat)).data
        dw_dx = inverse_transform(ddx(w_hat)).data
        du_dy = inverse_transform(SpectralField(
            1j * self.m * u_hat.data, self.grid_bih, mesh)).data
        du_dz = inverse_transform(SpectralField(
            1j * self.n * u_hat.data, self.grid_bih, mesh)).data

        om_y = du_dz - dw_dx
        om_z = dv_dx - du_dy

        h_x = v * om_z - w * om_y
        h_y = w * om_x - u * om_z
        h_z = u * om_y - v * om_x

        out = tuple(
            self.apply_mask(forward_transform(PhysicalField(h, mesh),
                                              Space.DIRICHLET))
            for h in (h_x, h_y, h_z))
        return out

    # -- right-hand sides ----------------------------------------------

    def _ab2(self, state: FlowState) -> tuple:
        return tuple(1.5 * c.data - 0.5 * p.data
                     for c, p in zip(state.h_curr, state.h_prev))

    def assemble_rhs_u(self, state: FlowState, h_ab: tuple) -> np.ndarray:
        """Explicit side of the implicit biharmonic update."""
        nu, dt = self.config.nu, self.config.dt
        z2 = self.z2
        u = state.u_hat.data
        mats = self.mats
        # explicit Crank-Nicolson operator on u
        rhs = (nu * dt / 2) * mats.fourth_bih.apply(u)
        rhs -= (1 - nu * dt * z2) * mats.stiff_bih.apply(u)
        rhs += (-z2 + nu * dt * z2 ** 2 / 2) * mats.mass_bih.apply(u)
        # source terms from the nonlinear convection
        h_x, h_y, h_z = h_ab
        rhs -= dt * z2 * mats.mixed_mass.apply(h_x)
        rhs -= dt * 1j * self.m * mats.deriv_dir_to_bih.apply(h_y)
        rhs -= dt * 1j * self.n * mats.deriv_dir_to_bih.apply(h_z)
        return rhs

    def assemble_rhs_g(self, state: FlowState, h_ab: tuple) -> np.ndarray:
        """Explicit side of the implicit Helmholtz update."""
        nu, dt = self.config.nu, self.config.dt
        g = state.g_hat.data
        mats = self.mats
        rhs = -(nu * dt / 2) * mats.stiff_dir.apply(g)
        rhs += (1 - nu * dt * self.z2 / 2) * mats.mass_dir.apply(g)
        _, h_y, h_z = h_ab
        src = 1j * self.m * h_z - 1j * self.n * h_y
        rhs += dt * mats.mass_dir.apply(src)
        return rhs

    # -- diagnostics ----------------------------------------------------

    def bulk_flux(self, state: FlowState) -> float:
        """Streamwise volume flux per unit cross-sectional area."""
        mean_profile = state.v_hat.data[:, 0, 0].real / (
            self.mesh.n_y * self.mesh.n_z)
        return float(self.flux_weights @ mean_profile)

    def continuity_residual(self, state: FlowState) -> float:
        """max |B f - C u| over all wavenumbers (divergence constraint)."""
        f_scal = self.mats.deriv_bih_to_dir.apply(state.u_hat.data)
        f_hat = mass_solve(f_scal, Space.DIRICHLET, self.mesh.n_x,
                           self.mesh.family)
        resid = self.mats.mass_dir.apply(f_hat) - f_scal
        return float(np.abs(resid).max())

    def kinetic_energy(self, state: FlowState) -> float:
        """Volume-averaged kinetic energy (1/2)<|u|^2>."""
        u = inverse_transform(state.u_hat).data
        v = inverse_transform(state.v_hat).data
        w = inverse_transform(state.w_hat).data
        q = (u * u + v * v + w * w).mean(axis=(1, 2))
        from .transforms import shen_scalar
        coeffs = shen_scalar(q, self.mesh.family, Space.CHEBYSHEV)
        weights = chebyshev_integral_weights(coeffs.shape[0])
        return float(weights @ coeffs) / 4  # (1/2) * (1/|x-extent|) * integral

    # -- stepping -------------------------------------------------------

    def initialize(self, velocity0: tuple, velocity1: tuple,
                   beta: float | None = None) -> FlowState:
        """Build a ready-to-step state from two physical velocity fields.

        ``velocity0``/``velocity1`` hold (u, v, w) samples at t = 0 and
        t = dt; both must satisfy no-slip at the walls.
        """
        for vel in (velocity0, velocity1):
            for comp in vel:
                walls = np.abs([comp[0], comp[-1]]) \
                    if self.mesh.family is PointFamily.GAUSS_LOBATTO else None
                if walls is not None and np.max(walls) > 1e-10:
                    raise ValueError("initial field violates no-slip walls")
        if beta is None:
            beta = self.config.beta
        state0 = self._state_from_physical(velocity0, beta, t=0.0, kappa=0)
        h0 = self.compute_nonlinear(state0)
        state1 = self._state_from_physical(velocity1, beta,
                                           t=self.config.dt, kappa=1)
        return replace(state1, h_curr=h0, h_prev=h0)

    def _state_from_physical(self, velocity, beta, t, kappa) -> FlowState:
        mesh = self.mesh
        u, v, w = (PhysicalField(np.asarray(c, dtype=float), mesh)
                   for c in velocity)
        u_hat = self.apply_mask(forward_transform(u, Space.BIHARMONIC))
        v_hat = self.apply_mask(forward_transform(v, Space.DIRICHLET))
        w_hat = self.apply_mask(forward_transform(w, Space.DIRICHLET))
        g_data = 1j * self.m * w_hat.data - 1j * self.n * v_hat.data
        g_hat = SpectralField(g_data, self.grid_dir, mesh)
        zero = tuple(SpectralField(np.zeros_like(v_hat.data),
                                   self.grid_dir, mesh) for _ in range(3))
        return FlowState(u_hat, v_hat, w_hat, g_hat, zero, zero,
                         beta, t, kappa)

    def step(self, state: FlowState) -> FlowState:
        """Advance one time step."""
        mesh, cfg = self.mesh, self.config
        h_new = self.compute_nonlinear(state)
        state = replace(state, h_curr=h_new, h_prev=state.h_curr)
        h_ab = self._ab2(state)

        u_new = self.biharmonic.solve(self.assemble_rhs_u(state, h_ab))
        g_new = self.helmholtz.solve(self.assemble_rhs_g(state, h_ab))

        # divergence variable and horizontal velocity recovery
        f_scal = self.mats.deriv_bih_to_dir.apply(u_new)
        f_hat = mass_solve(f_scal, Space.DIRICHLET, mesh.n_x, mesh.family)
        # f_hat carries the projection of du/dx = -(dv/dy + dw/dz)
        safe_z2 = np.where(self.z2 > 0, self.z2, 1.0)
        v_new = (1j * self.m * f_hat + 1j * self.n * g_new) / safe_z2
        w_new = (1j * self.n * f_hat - 1j * self.m * g_new) / safe_z2

        # mean (m = n = 0) momentum equations with the driving gradient
        nu, dt = cfg.nu, cfg.dt
        beta = cfg.beta if cfg.forcing is Forcing.FIXED_BETA else state.beta
        mats = self.mats

        def mean_rhs(vec, h_comp):
            rhs = -(nu * dt / 2) * mats.stiff_dir.apply(vec)
            rhs += mats.mass_dir.apply(vec)
            rhs += dt * mats.mass_dir.apply(h_comp)
            return rhs

        v0 = state.v_hat.data[:, 0:1, 0]
        w0 = state.w_hat.data[:, 0:1, 0]
        hy0 = h_ab[1][:, 0:1, 0]
        hz0 = h_ab[2][:, 0:1, 0]
        rhs_v0 = mean_rhs(v0, hy0)
        rhs_v0[0] -= dt * beta * np.pi * mesh.n_y * mesh.n_z
        rhs_w0 = mean_rhs(w0, hz0)
        v0_new = self.helmholtz_mean.solve(rhs_v0)
        w0_new = self.helmholtz_mean.solve(rhs_w0)

        if cfg.forcing is Forcing.CONSTANT_FLUX:
            scale = mesh.n_y * mesh.n_z
            flux = float(self.flux_weights @ v0_new[:, 0].real) / scale
            delta = (cfg.target_flux - flux) / self.flux_sensitivity
            v0_new = v0_new + delta * self.beta_response[:, None]
            beta = beta + delta

        v_new[:, 0, 0] = v0_new[:, 0]
        w_new[:, 0, 0] = w0_new[:, 0]

        new = FlowState(
            u_hat=SpectralField(u_new, self.grid_bih, mesh),
            v_hat=SpectralField(v_new, self.grid_dir, mesh),
            w_hat=SpectralField(w_new, self.grid_dir, mesh),
            g_hat=SpectralField(g_new, self.grid_dir, mesh),
            h_curr=state.h_curr,
            h_prev=state.h_prev,
            beta=beta,
            t=state.t + dt,
            kappa=state.kappa + 1,
        )
        return new


# ----------------------------------------------------------------------
# checkpointing

_MAGIC = b"CHCHKPT1"


def save_checkpoint(path, state: FlowState, config: StepperConfig):
    """Write the full spectral state to a binary checkpoint file."""
    mesh = state.u_hat.mesh
    fam = 0 if mesh.family is PointFamily.GAUSS else 1
    header = struct.pack(
        "<8siiiiddddddqi", _MAGIC, 1, mesh.n_x, mesh.n_y, mesh.n_z,
        mesh.l_y, mesh.l_z, config.nu, config.dt, state.t, state.beta,
        state.kappa, fam)
    arrays = [state.u_hat.data, state.v_hat.data, state.w_hat.data,
              state.g_hat.data]
    arrays += [f.data for f in state.h_curr]
    arrays += [f.data for f in state.h_prev]
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<c16").tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns (state, config, mesh)."""
    hdr_size = struct.calcsize("<8siiiiddddddqi")
    with open(path, "rb") as fh:
        raw = fh.read(hdr_size)
        (magic, version, n_x, n_y, n_z, l_y, l_z, nu, dt, t, beta,
         kappa, fam) = struct.unpack("<8siiiiddddddqi", raw)
        if magic != _MAGIC or version != 1:
            raise ValueError(f"not a recognized checkpoint file: {path}")
        family = PointFamily.GAUSS if fam == 0 else PointFamily.GAUSS_LOBATTO
        mesh = build_mesh(n_x, n_y, n_z, l_y, l_z, family)
        grid_dir = wavenumber_grid(mesh, Space.DIRICHLET)
        grid_bih = wavenumber_grid(mesh, Space.BIHARMONIC)
        yz = mesh.spectral_shape_yz

        def read(grid):
            shape = (grid.n_modes,) + yz
            count = int(np.prod(shape))
            arr = np.frombuffer(fh.read(16 * count), dtype="<c16")
            return SpectralField(arr.reshape(shape).copy(), grid, mesh)

        u_hat = read(grid_bih)
        v_hat, w_hat, g_hat = read(grid_dir), read(grid_dir), read(grid_dir)
        h_curr = tuple(read(grid_dir) for _ in range(3))
        h_prev = tuple(read(grid_dir) for _ in range(3))
    config = StepperConfig(nu=nu, dt=dt)
    state = FlowState(u_hat, v_hat, w_hat, g_hat, h_curr, h_prev,
                      beta, t, kappa)
    return state, config, mesh
