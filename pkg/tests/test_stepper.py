"""Time-stepper invariants: steady states, decay, continuity, restarts."""

import numpy as np
import pytest

from chebchan.matrices import assemble
from chebchan.mesh import PointFamily, Space, build_mesh
from chebchan.stepper import (ChannelStepper, Forcing, FlowState,
                              StepperConfig, load_checkpoint,
                              save_checkpoint)
from chebchan.transforms import inverse_transform


def laminar_fields(mesh, amplitude=1.0):
    prof = amplitude * (1 - mesh.x ** 2)
    v = np.broadcast_to(prof[:, None, None], mesh.shape).copy()
    zero = np.zeros(mesh.shape)
    return (zero, v, zero.copy())


def test_laminar_profile_is_steady():
    nu = 0.01
    mesh = build_mesh(32, 8, 4, 2 * np.pi, np.pi, PointFamily.GAUSS)
    cfg = StepperConfig(nu=nu, dt=0.01, beta=-2 * nu, dealias=True)
    stepper = ChannelStepper(mesh, cfg)
    state = stepper.initialize(laminar_fields(mesh), laminar_fields(mesh))
    ref = state.v_hat.data.copy()
    for _ in range(100):
        state = stepper.step(state)
    drift = np.abs(state.v_hat.data - ref).max() / np.abs(ref).max()
    assert drift < 1e-10
    assert np.abs(state.u_hat.data).max() < 1e-10


def test_zero_state_stays_zero():
    mesh = build_mesh(16, 4, 4, 2 * np.pi, np.pi, PointFamily.GAUSS)
    cfg = StepperConfig(nu=0.1, dt=0.01, beta=0.0)
    stepper = ChannelStepper(mesh, cfg)
    zero = tuple(np.zeros(mesh.shape) for _ in range(3))
    state = stepper.initialize(zero, tuple(z.copy() for z in zero))
    for _ in range(10):
        state = stepper.step(state)
    assert np.abs(state.v_hat.data).max() == 0.0
    assert np.abs(state.u_hat.data).max() == 0.0


def _perturbed_fields(mesh, seed=7, amp=0.05):
    rng = np.random.default_rng(seed)
    x = mesh.x[:, None, None]
    y = (np.arange(mesh.n_y) * mesh.l_y / mesh.n_y)[None, :, None]
    z = (np.arange(mesh.n_z) * mesh.l_z / mesh.n_z)[None, None, :]
    env = 1 - x ** 2
    v = env * np.ones(mesh.shape)
    v += amp * env * np.cos(2 * np.pi * y / mesh.l_y) \
        * np.cos(2 * np.pi * z / mesh.l_z)
    w = amp * env * np.sin(2 * np.pi * y / mesh.l_y) \
        * np.ones(mesh.shape)
    u = np.zeros(mesh.shape)
    return (u, v, w)


def test_unforced_energy_decays_monotonically():
    nu = 0.05
    mesh = build_mesh(32, 8, 8, 2 * np.pi, np.pi, PointFamily.GAUSS)
    cfg = StepperConfig(nu=nu, dt=0.005, beta=0.0, dealias=True)
    stepper = ChannelStepper(mesh, cfg)
    fields = _perturbed_fields(mesh)
    state = stepper.initialize(fields, tuple(f.copy() for f in fields))
    prev = stepper.kinetic_energy(state)
    for _ in range(100):
        state = stepper.step(state)
        e = stepper.kinetic_energy(state)
        assert e <= prev + 1e-12
        prev = e


def test_continuity_residual_small():
    nu = 1 / 180
    mesh = build_mesh(32, 16, 8, 2 * np.pi, np.pi, PointFamily.GAUSS)
    cfg = StepperConfig(nu=nu, dt=1e-3, forcing=Forcing.CONSTANT_FLUX,
                        target_flux=4 / 3, dealias=True)
    stepper = ChannelStepper(mesh, cfg)
    fields = _perturbed_fields(mesh)
    state = stepper.initialize(fields, tuple(f.copy() for f in fields),
                               beta=-2 * nu)
    for _ in range(20):
        state = stepper.step(state)
        assert stepper.continuity_residual(state) < 1e-10


def test_velocity_recovery_algebra():
    # i*m*v + i*n*w must cancel the wall-normal divergence contribution
    # for every wavenumber pair except the mean
    nu = 1 / 180
    mesh = build_mesh(32, 8, 8, 2 * np.pi, np.pi, PointFamily.GAUSS)
    cfg = StepperConfig(nu=nu, dt=1e-3, beta=-2 * nu, dealias=True)
    stepper = ChannelStepper(mesh, cfg)
    fields = _perturbed_fields(mesh)
    state = stepper.initialize(fields, tuple(f.copy() for f in fields))
    for _ in range(5):
        state = stepper.step(state)
    from chebchan.transforms import mass_solve
    f_scal = stepper.mats.deriv_bih_to_dir.apply(state.u_hat.data)
    f_hat = mass_solve(f_scal, Space.DIRICHLET, mesh.n_x, mesh.family)
    div = 1j * stepper.m * state.v_hat.data \
        + 1j * stepper.n * state.w_hat.data + f_hat
    div[:, 0, 0] = 0.0
    scale = max(np.abs(state.v_hat.data).max(), 1.0)
    assert np.abs(div).max() / scale < 1e-12


def test_hermitian_symmetry_of_coefficients():
    nu = 0.02
    mesh = build_mesh(16, 8, 4, 2 * np.pi, np.pi, PointFamily.GAUSS)
    cfg = StepperConfig(nu=nu, dt=1e-3, beta=-2 * nu)
    stepper = ChannelStepper(mesh, cfg)
    fields = _perturbed_fields(mesh)
    state = stepper.initialize(fields, tuple(f.copy() for f in fields))
    for _ in range(5):
        state = stepper.step(state)
    # on the n = 0 plane, coefficients at +m and -m are conjugates
    for data in (state.v_hat.data, state.w_hat.data, state.u_hat.data):
        plane = data[:, :, 0]
        for m in range(1, mesh.n_y // 2):
            err = np.abs(plane[:, m] - np.conj(plane[:, -m])).max()
            assert err < 1e-12
    back = inverse_transform(state.v_hat)
    assert np.isfinite(back.data).all()


def test_mean_mode_matches_dense_crank_nicolson():
    # with no nonlinear coupling the mean streamwise profile follows a
    # 1-D heat equation; the fast solve must match the dense one
    nu, dt = 0.05, 0.02
    mesh = build_mesh(24, 4, 2, 2 * np.pi, np.pi, PointFamily.GAUSS)
    cfg = StepperConfig(nu=nu, dt=dt, beta=0.0, dealias=False)
    stepper = ChannelStepper(mesh, cfg)
    rng = np.random.default_rng(21)
    coeffs = rng.standard_normal(stepper.mats.n_dir)
    from chebchan.transforms import SpectralField, shen_expand, \
        chebyshev_evaluate
    prof = chebyshev_evaluate(
        shen_expand(coeffs, Space.DIRICHLET, mesh.n_x), mesh.family)
    v = np.broadcast_to(prof[:, None, None], mesh.shape).copy()
    zero = np.zeros(mesh.shape)
    state = stepper.initialize((zero, v, zero.copy()),
                               (zero.copy(), v.copy(), zero.copy()))

    mats = assemble(mesh.n_x, mesh.family)
    b = mats.mass_dir.dense()
    a = mats.stiff_dir.dense()
    left = b + (nu * dt / 2) * a
    right = b - (nu * dt / 2) * a
    dense_v = state.v_hat.data[:, 0, 0].copy()
    for _ in range(10):
        state = stepper.step(state)
        dense_v = np.linalg.solve(left, right @ dense_v)
    got = state.v_hat.data[:, 0, 0]
    assert np.abs(got - dense_v).max() / np.abs(dense_v).max() < 1e-12


def test_constant_flux_control_holds_target():
    nu = 1 / 180
    mesh = build_mesh(32, 8, 8, 2 * np.pi, np.pi, PointFamily.GAUSS)
    cfg = StepperConfig(nu=nu, dt=1e-3, forcing=Forcing.CONSTANT_FLUX,
                        target_flux=4 / 3, dealias=True)
    stepper = ChannelStepper(mesh, cfg)
    fields = _perturbed_fields(mesh)
    state = stepper.initialize(fields, tuple(f.copy() for f in fields),
                               beta=-2 * nu)
    for _ in range(20):
        state = stepper.step(state)
        assert abs(stepper.bulk_flux(state) - 4 / 3) < 1e-12


def test_dealiased_product_has_no_top_third_energy():
    nu = 0.05
    mesh = build_mesh(16, 12, 12, 2 * np.pi, np.pi, PointFamily.GAUSS)
    cfg = StepperConfig(nu=nu, dt=1e-3, beta=-2 * nu, dealias=True)
    stepper = ChannelStepper(mesh, cfg)
    x = mesh.x[:, None, None]
    y = (np.arange(12) * mesh.l_y / 12)[None, :, None]
    env = 1 - x ** 2
    v = env * (1 + 0.1 * np.cos(2 * 2 * np.pi * y / mesh.l_y)) \
        * np.ones(mesh.shape)
    zero = np.zeros(mesh.shape)
    state = stepper.initialize((zero, v, zero.copy()),
                               (zero.copy(), v.copy(), zero.copy()))
    h = stepper.compute_nonlinear(state)
    for comp in h:
        cut = mesh.n_y // 3
        high = np.abs(comp.data[:, cut:mesh.n_y - cut + 1, :])
        assert high.max() == 0.0


def test_checkpoint_roundtrip():
    nu = 1 / 180
    mesh = build_mesh(16, 8, 4, 2 * np.pi, np.pi, PointFamily.GAUSS)
    cfg = StepperConfig(nu=nu, dt=1e-3, forcing=Forcing.CONSTANT_FLUX,
                        target_flux=4 / 3)
    stepper = ChannelStepper(mesh, cfg)
    fields = _perturbed_fields(mesh)
    state = stepper.initialize(fields, tuple(f.copy() for f in fields),
                               beta=-2 * nu)
    for _ in range(3):
        state = stepper.step(state)
    import tempfile, os
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "state.bin")
        save_checkpoint(path, state, cfg)
        loaded, loaded_cfg, loaded_mesh = load_checkpoint(path)
    assert loaded_mesh.shape == mesh.shape
    assert loaded_cfg.nu == cfg.nu and loaded_cfg.dt == cfg.dt
    assert loaded.t == state.t
    assert loaded.kappa == state.kappa
    assert loaded.beta == state.beta
    assert np.array_equal(loaded.u_hat.data, state.u_hat.data)
    assert np.array_equal(loaded.v_hat.data, state.v_hat.data)
    assert np.array_equal(loaded.g_hat.data, state.g_hat.data)
    for a, b in zip(loaded.h_curr, state.h_curr):
        assert np.array_equal(a.data, b.data)
    # the restored state steps identically
    cont = stepper.step(loaded)
    ref = stepper.step(state)
    assert np.array_equal(cont.v_hat.data, ref.v_hat.data)


def test_corrupt_checkpoint_rejected(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"not a checkpoint at all" + b"\0" * 100)
    with pytest.raises(ValueError):
        load_checkpoint(str(path))


def test_initialize_rejects_slip_on_walls():
    mesh = build_mesh(16, 4, 2, 2 * np.pi, np.pi,
                      PointFamily.GAUSS_LOBATTO)
    cfg = StepperConfig(nu=0.1, dt=0.01)
    stepper = ChannelStepper(mesh, cfg)
    bad = tuple(np.ones(mesh.shape) for _ in range(3))
    with pytest.raises(ValueError):
        stepper.initialize(bad, bad)
