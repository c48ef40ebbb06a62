"""Command-line interface: channel runs, experiments, and utilities.

Subcommands map one-to-one onto library operations:

    channel               time-step a channel flow, write statistics
    roundoff              solver recovery-error study
    bench-solve           direct-solver wall-time scaling
    bench-step            full-step wall-time scaling
    orr-sommerfeld-time   temporal convergence against the analytic mode
    orr-sommerfeld-space  spatial convergence against the analytic mode
    transforms-selftest   forward/inverse round-trip checks
    dump-matrix           write one operator matrix as dense CSV

Configuration comes from an INI file (key = value under sections) plus
command-line overrides; the effective configuration is echoed into the
run directory so any run can be reproduced from its own output.  Exit
codes: 0 success, 2 configuration error, 3 numerical failure or failed
assertion.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys

import numpy as np

from .mesh import PointFamily, Space, build_mesh
from .solvers import ZeroPivotError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

THREAD_ENV_VAR = "CHEBCHAN_THREADS"
TIMING_COMMANDS = {"bench-solve", "bench-step"}

# allowed configuration keys per section (unknown keys are rejected)
_SCHEMA = {
    "mesh": {"nx", "ny", "nz", "ly", "lz", "family"},
    "flow": {"nu", "re_tau", "dt", "forcing", "beta", "target_flux",
             "dealias"},
    "run": {"steps", "seed", "threads", "output_dir",
            "checkpoint_interval", "statistics_interval", "checkpoint",
            "reference_profile"},
    "experiment": {"nx_list", "z_list", "dt_list", "runs", "t_end",
                   "family", "matrix", "operator"},
}

_DEFAULTS = {
    "mesh": {"nx": "64", "ny": "64", "nz": "32", "ly": "6.283185307179586",
             "lz": "3.141592653589793", "family": "gauss"},
    "flow": {"nu": "0.005555555555555556", "dt": "0.001",
             "forcing": "constant-flux", "beta": "0.0",
             "target_flux": "1.3333333333333333", "dealias": "true"},
    "run": {"steps": "100", "seed": "1234", "checkpoint_interval": "0",
            "statistics_interval": "10"},
    "experiment": {"runs": "100", "t_end": "50.0", "family": "gauss"},
}


def _parse_family(text: str) -> PointFamily:
    key = text.strip().lower()
    if key in ("gauss", "gc", "chebyshev-gauss"):
        return PointFamily.GAUSS
    if key in ("gauss-lobatto", "gl", "lobatto"):
        return PointFamily.GAUSS_LOBATTO
    raise ValueError(f"unknown point family: {text!r}")


def _parse_bool(text: str) -> bool:
    key = text.strip().lower()
    if key in ("1", "true", "yes", "on"):
        return True
    if key in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text: str):
    return [float(t) for t in text.split(",") if t.strip()]


def _parse_ints(text: str):
    return [int(t) for t in text.split(",") if t.strip()]


class ConfigError(Exception):
    pass


def load_config(path: str | None, overrides: dict) -> configparser.ConfigParser:
    """Merge defaults, an optional INI file, and flag overrides."""
    cfg = configparser.ConfigParser()
    for section, values in _DEFAULTS.items():
        cfg[section] = dict(values)
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        user = configparser.ConfigParser()
        try:
            user.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        for section in user.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in user[section].items():
                if key not in _SCHEMA[section]:
                    raise ConfigError(
                        f"unknown key {key!r} in section [{section}]")
                cfg[section][key] = value
    for (section, key), value in overrides.items():
        if value is None:
            continue
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        cfg[section][key] = str(value)
    return cfg


def echo_config(cfg: configparser.ConfigParser, run_dir: str):
    with open(os.path.join(run_dir, "config.ini"), "w") as fh:
        cfg.write(fh)


def _resolve_threads(cfg, command: str) -> int:
    if command in TIMING_COMMANDS:
        return 1
    if cfg.has_option("run", "threads"):
        return max(1, int(cfg["run"]["threads"]))
    env = os.environ.get(THREAD_ENV_VAR)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _figure_path(run_dir, name):
    return os.path.join(run_dir, name + ".png")


def _plot_report(report, run_dir, kind):
    """Render one diagnostic figure per experiment next to its CSV."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.2))
    if kind == "roundoff":
        for op in ("helmholtz", "biharmonic"):
            rows = [r for r in report.rows if r[0] == op]
            zs = sorted({r[1] for r in rows})
            for z in zs:
                pts = [(r[2], r[3]) for r in rows if r[1] == z]
                ax.loglog(*zip(*pts), "o-", label=f"{op}, z={z:g}")
        ax.set_xlabel("wall-normal modes")
        ax.set_ylabel("mean recovery error")
        ax.legend(fontsize=7)
    elif kind in ("bench-solve",):
        for op in ("helmholtz", "biharmonic"):
            pts = [(r[1], r[2]) for r in report.rows if r[0] == op]
            ax.loglog(*zip(*pts), "o-", label=op)
        ax.set_xlabel("wall-normal modes")
        ax.set_ylabel("seconds per solve")
        ax.legend()
    elif kind == "bench-step":
        n = report.column("n_x")
        for name in ("total", "assemble", "solve"):
            ax.loglog(n, report.column(name), "o-", label=name)
        ax.set_xlabel("wall-normal modes")
        ax.set_ylabel("seconds per step")
        ax.legend()
    elif kind == "os-time":
        dt = report.column("dt")
        err = report.column("l2_error")
        ax.loglog(dt, err, "o-", label="error norm")
        guide = [err[0] * (d / dt[0]) ** 2 for d in dt]
        ax.loglog(dt, guide, "k--", label="second order")
        ax.set_xlabel("time step")
        ax.set_ylabel("error at t = 50")
        ax.legend()
    elif kind == "os-space":
        ax.semilogy(report.column("n_x"), report.column("error_over_eps"),
                    "o-")
        ax.set_xlabel("wall-normal modes")
        ax.set_ylabel("normalized error")
    elif kind == "channel":
        # report is (times, fluxes, energies) here
        times, fluxes, energies = report
        ax.plot(times, fluxes, label="bulk flux")
        ax2 = ax.twinx()
        ax2.plot(times, energies, "C1", label="kinetic energy")
        ax.set_xlabel("t")
        ax.set_ylabel("bulk flux")
        ax2.set_ylabel("kinetic energy")
    fig.tight_layout()
    fig.savefig(_figure_path(run_dir, kind))
    plt.close(fig)


# ----------------------------------------------------------------------
# subcommand implementations

def _cmd_channel(cfg, run_dir) -> int:
    from .stepper import (ChannelStepper, Forcing, StepperConfig,
                          load_checkpoint, save_checkpoint)
    from .transforms import inverse_transform

    mesh_sec, flow, run = cfg["mesh"], cfg["flow"], cfg["run"]
    family = _parse_family(mesh_sec["family"])
    if cfg.has_option("flow", "re_tau"):
        nu = 1.0 / float(flow["re_tau"])
    else:
        nu = float(flow["nu"])
    forcing = {"fixed-beta": Forcing.FIXED_BETA,
               "constant-flux": Forcing.CONSTANT_FLUX}.get(
        flow["forcing"].strip().lower())
    if forcing is None:
        print(f"error: unknown forcing mode {flow['forcing']!r}",
              file=sys.stderr)
        return EXIT_CONFIG
    mesh = build_mesh(int(mesh_sec["nx"]), int(mesh_sec["ny"]),
                      int(mesh_sec["nz"]), float(mesh_sec["ly"]),
                      float(mesh_sec["lz"]), family)
    sc = StepperConfig(nu=nu, dt=float(flow["dt"]), forcing=forcing,
                       beta=float(flow["beta"]),
                       target_flux=float(flow["target_flux"]),
                       dealias=_parse_bool(flow["dealias"]))
    stepper = ChannelStepper(mesh, sc)

    if cfg.has_option("run", "checkpoint"):
        state, _, ck_mesh = load_checkpoint(run["checkpoint"])
        if ck_mesh.shape != mesh.shape:
            print("error: checkpoint mesh does not match configuration",
                  file=sys.stderr)
            return EXIT_CONFIG
    else:
        rng = np.random.default_rng(int(run["seed"]))
        x = mesh.x[:, None, None]
        y = (np.arange(mesh.n_y) * mesh.l_y / mesh.n_y)[None, :, None]
        z = (np.arange(mesh.n_z) * mesh.l_z / mesh.n_z)[None, None, :]
        envelope = 1 - x ** 2
        v = envelope * np.ones(mesh.shape)
        w = np.zeros(mesh.shape)
        for _ in range(6):
            my, nz_ = rng.integers(1, 4, size=2)
            amp = 0.08 * rng.standard_normal(2)
            v = v + amp[0] * envelope \
                * np.cos(my * y * 2 * np.pi / mesh.l_y
                         + rng.uniform(0, 2 * np.pi)) \
                * np.cos(nz_ * z * 2 * np.pi / mesh.l_z)
            w = w + amp[1] * envelope \
                * np.sin(my * y * 2 * np.pi / mesh.l_y) \
                * np.cos(nz_ * z * 2 * np.pi / mesh.l_z
                         + rng.uniform(0, 2 * np.pi))
        u = np.zeros(mesh.shape)
        state = stepper.initialize((u, v, w),
                                   (u.copy(), v.copy(), w.copy()),
                                   beta=float(flow["beta"]) or -2 * nu)

    steps = int(run["steps"])
    stat_every = max(1, int(run["statistics_interval"]))
    ck_every = int(run["checkpoint_interval"])
    times, fluxes, energies = [], [], []
    with open(os.path.join(run_dir, "statistics.csv"), "w") as stats:
        stats.write("t,flux,beta,e_kin\n")
        for _ in range(steps):
            state = stepper.step(state)
            if not np.isfinite(state.v_hat.data).all():
                print("error: solution diverged (non-finite coefficients)",
                      file=sys.stderr)
                return EXIT_NUMERICAL
            if state.kappa % stat_every == 0:
                flux = stepper.bulk_flux(state)
                e_kin = stepper.kinetic_energy(state)
                stats.write(f"{state.t!r},{flux!r},{state.beta!r},"
                            f"{e_kin!r}\n")
                times.append(state.t)
                fluxes.append(flux)
                energies.append(e_kin)
            if ck_every and state.kappa % ck_every == 0:
                save_checkpoint(
                    os.path.join(run_dir, f"checkpoint-{state.kappa}.bin"),
                    state, sc)
    save_checkpoint(os.path.join(run_dir, "checkpoint-final.bin"),
                    state, sc)

    # mean streamwise velocity profile (plot-ready two-column file)
    v_phys = inverse_transform(state.v_hat).data
    profile = v_phys.mean(axis=(1, 2))
    with open(os.path.join(run_dir, "mean_profile.csv"), "w") as fh:
        fh.write("x,v_mean\n")
        for xi, vi in zip(mesh.x, profile):
            fh.write(f"{xi!r},{vi!r}\n")
    _plot_report((times, fluxes, energies), run_dir, "channel")

    if cfg.has_option("run", "reference_profile"):
        _plot_profile_comparison(run["reference_profile"], mesh.x, profile,
                                 run_dir)
    return EXIT_OK


def _plot_profile_comparison(ref_path, x, profile, run_dir):
    """Overlay the run's mean profile on external two-column reference data."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    ref = np.loadtxt(ref_path)
    fig, ax = plt.subplots(figsize=(6, 4.2))
    ax.plot(x, profile, label="this run")
    ax.plot(ref[:, 0], ref[:, 1], "k--", label="reference")
    ax.set_xlabel("x")
    ax.set_ylabel("mean streamwise velocity")
    ax.legend()
    fig.tight_layout()
    fig.savefig(_figure_path(run_dir, "profile-comparison"))
    plt.close(fig)


def _report_command(report, run_dir, kind) -> int:
    report.write_csv(os.path.join(run_dir, kind + ".csv"))
    _plot_report(report, run_dir, kind)
    for row in report.rows:
        print(",".join(str(v) for v in row))
    if not report.passed:
        print(f"{kind}: FAILED", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"{kind}: passed")
    return EXIT_OK


def _cmd_roundoff(cfg, run_dir) -> int:
    from .verify import roundoff_experiment
    exp = cfg["experiment"]
    kwargs = {}
    if cfg.has_option("experiment", "nx_list"):
        kwargs["n_x_list"] = tuple(_parse_ints(exp["nx_list"]))
    if cfg.has_option("experiment", "z_list"):
        kwargs["z_list"] = tuple(_parse_floats(exp["z_list"]))
    kwargs["runs"] = int(exp["runs"])
    return _report_command(roundoff_experiment(**kwargs), run_dir,
                           "roundoff")


def _cmd_bench_solve(cfg, run_dir) -> int:
    from .verify import solver_scaling
    exp = cfg["experiment"]
    kwargs = {}
    if cfg.has_option("experiment", "nx_list"):
        kwargs["n_x_list"] = tuple(_parse_ints(exp["nx_list"]))
    return _report_command(solver_scaling(**kwargs), run_dir, "bench-solve")


def _cmd_bench_step(cfg, run_dir) -> int:
    from .verify import pipeline_scaling
    exp = cfg["experiment"]
    kwargs = {}
    if cfg.has_option("experiment", "nx_list"):
        kwargs["n_x_list"] = tuple(_parse_ints(exp["nx_list"]))
    return _report_command(pipeline_scaling(**kwargs), run_dir,
                           "bench-step")


def _cmd_os_time(cfg, run_dir) -> int:
    from .verify import os_convergence_time
    exp = cfg["experiment"]
    kwargs = {"t_end": float(exp["t_end"])}
    if cfg.has_option("experiment", "dt_list"):
        kwargs["dt_list"] = tuple(_parse_floats(exp["dt_list"]))
    return _report_command(os_convergence_time(**kwargs), run_dir,
                           "os-time")


def _cmd_os_space(cfg, run_dir) -> int:
    from .verify import os_convergence_space
    exp = cfg["experiment"]
    kwargs = {"family": _parse_family(exp["family"])}
    if cfg.has_option("experiment", "nx_list"):
        kwargs["n_x_list"] = tuple(_parse_ints(exp["nx_list"]))
    return _report_command(os_convergence_space(**kwargs), run_dir,
                           "os-space")


def _cmd_transforms_selftest(cfg, run_dir) -> int:
    from .transforms import (PhysicalField, forward_transform,
                             inverse_transform)
    from .verify import ExperimentReport
    rng = np.random.default_rng(int(cfg["run"]["seed"]))
    report = ExperimentReport(
        "transforms-selftest",
        ["family", "space", "n_x", "roundtrip_error", "threshold",
         "provenance", "pass"])
    for family in PointFamily:
        for space in Space:
            for n_x in (8, 16, 32, 64):
                mesh = build_mesh(n_x, 8, 4, 2 * np.pi, np.pi, family)
                coeffs = forward_transform(
                    PhysicalField(rng.standard_normal(mesh.shape), mesh),
                    space)
                back = forward_transform(inverse_transform(coeffs), space)
                err = float(np.abs(back.data - coeffs.data).max()
                            / max(np.abs(coeffs.data).max(), 1e-300))
                report.add(family.value, space.name.lower(), n_x, err,
                           1e-12, "property", bool(err <= 1e-12))
    report.write_csv(os.path.join(run_dir, "transforms-selftest.csv"))
    for row in report.rows:
        print(",".join(str(v) for v in row))
    if not report.passed:
        print("transforms-selftest: FAILED", file=sys.stderr)
        return EXIT_NUMERICAL
    print("transforms-selftest: passed")
    return EXIT_OK


def _cmd_dump_matrix(cfg, run_dir) -> int:
    from .matrices import assemble
    exp = cfg["experiment"]
    if not cfg.has_option("experiment", "matrix"):
        print("error: dump-matrix requires a matrix name", file=sys.stderr)
        return EXIT_CONFIG
    name = exp["matrix"]
    n_x = _parse_ints(exp["nx_list"])[0] \
        if cfg.has_option("experiment", "nx_list") else 16
    family = _parse_family(exp["family"])
    mats = assemble(n_x, family)
    try:
        mat = mats.named(name)
    except KeyError:
        print(f"error: unknown matrix {name!r}", file=sys.stderr)
        return EXIT_CONFIG
    dense = mat if isinstance(mat, np.ndarray) else mat.dense()
    if dense.ndim == 1:
        dense = np.diag(dense)
    path = os.path.join(run_dir, f"{name}-{n_x}.csv")
    np.savetxt(path, dense, delimiter=",", fmt="%.17g")
    print(path)
    return EXIT_OK


_COMMANDS = {
    "channel": _cmd_channel,
    "roundoff": _cmd_roundoff,
    "bench-solve": _cmd_bench_solve,
    "bench-step": _cmd_bench_step,
    "orr-sommerfeld-time": _cmd_os_time,
    "orr-sommerfeld-space": _cmd_os_space,
    "transforms-selftest": _cmd_transforms_selftest,
    "dump-matrix": _cmd_dump_matrix,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chebchan",
        description="Spectral channel-flow solver and verification suite.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--output-dir", help="run directory for outputs")
        p.add_argument("--threads", type=int,
                       help="worker threads for transforms")
        p.add_argument("--seed", type=int, help="random seed")

    p = sub.add_parser("channel", help="time-step a channel flow")
    common(p)
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--nz", type=int)
    p.add_argument("--family")
    p.add_argument("--nu", type=float)
    p.add_argument("--re-tau", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--forcing")
    p.add_argument("--beta", type=float)
    p.add_argument("--target-flux", type=float)
    p.add_argument("--dealias")
    p.add_argument("--checkpoint", help="resume from this checkpoint")
    p.add_argument("--reference-profile",
                   help="two-column x, velocity file to compare against")

    for name in ("roundoff", "bench-solve", "bench-step",
                 "orr-sommerfeld-space"):
        p = sub.add_parser(name)
        common(p)
        p.add_argument("--nx", help="comma-separated resolutions")
        if name == "roundoff":
            p.add_argument("--z", help="comma-separated wavenumbers")
            p.add_argument("--runs", type=int)
        if name == "orr-sommerfeld-space":
            p.add_argument("--family")

    p = sub.add_parser("orr-sommerfeld-time")
    common(p)
    p.add_argument("--dt", help="comma-separated time steps")
    p.add_argument("--t-end", type=float)

    p = sub.add_parser("transforms-selftest")
    common(p)

    p = sub.add_parser("dump-matrix")
    common(p)
    p.add_argument("--name", help="matrix name, e.g. mass_dir")
    p.add_argument("--nx", type=int)
    p.add_argument("--family")
    return parser


def _collect_overrides(args) -> dict:
    """Map parsed flags onto (section, key) pairs."""
    pairs = {
        ("mesh", "nx"): getattr(args, "nx", None),
        ("mesh", "ny"): getattr(args, "ny", None),
        ("mesh", "nz"): getattr(args, "nz", None),
        ("mesh", "family"): getattr(args, "family", None),
        ("flow", "nu"): getattr(args, "nu", None),
        ("flow", "re_tau"): getattr(args, "re_tau", None),
        ("flow", "dt"): getattr(args, "dt", None),
        ("flow", "forcing"): getattr(args, "forcing", None),
        ("flow", "beta"): getattr(args, "beta", None),
        ("flow", "target_flux"): getattr(args, "target_flux", None),
        ("flow", "dealias"): getattr(args, "dealias", None),
        ("run", "steps"): getattr(args, "steps", None),
        ("run", "seed"): getattr(args, "seed", None),
        ("run", "threads"): getattr(args, "threads", None),
        ("run", "checkpoint"): getattr(args, "checkpoint", None),
        ("run", "reference_profile"): getattr(args, "reference_profile",
                                              None),
        ("experiment", "runs"): getattr(args, "runs", None),
        ("experiment", "t_end"): getattr(args, "t_end", None),
        ("experiment", "z_list"): getattr(args, "z", None),
        ("experiment", "matrix"): getattr(args, "name", None),
    }
    if args.command in ("channel", "dump-matrix"):
        pass  # --nx already mapped to mesh above
    else:
        pairs[("experiment", "nx_list")] = getattr(args, "nx", None)
        pairs.pop(("mesh", "nx"))
    if args.command == "orr-sommerfeld-time":
        pairs[("experiment", "dt_list")] = getattr(args, "dt", None)
        pairs.pop(("flow", "dt"))
    if args.command in ("orr-sommerfeld-space", "dump-matrix"):
        pairs[("experiment", "family")] = getattr(args, "family", None)
        pairs.pop(("mesh", "family"))
    if args.command == "dump-matrix":
        pairs[("experiment", "nx_list")] = getattr(args, "nx", None)
        pairs.pop(("mesh", "nx"))
    return pairs


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, _collect_overrides(args))
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    run_dir = args.output_dir or cfg["run"].get("output_dir") \
        or f"run-{args.command}"
    os.makedirs(run_dir, exist_ok=True)
    cfg["run"]["output_dir"] = run_dir
    threads = _resolve_threads(cfg, args.command)
    cfg["run"]["threads"] = str(threads)
    echo_config(cfg, run_dir)

    from scipy import fft as sfft
    try:
        with sfft.set_workers(threads):
            return _COMMANDS[args.command](cfg, run_dir)
    except ZeroPivotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
