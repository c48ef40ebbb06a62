"""Command-line interface: config handling, exit codes, outputs."""

import os

import numpy as np
import pytest

from chebchan.cli import (EXIT_CONFIG, EXIT_OK, ConfigError, load_config,
                          main)


def run_cli(args):
    return main(args)


def test_missing_config_file_exits_2(tmp_path):
    code = run_cli(["roundoff", "--config", str(tmp_path / "nope.ini"),
                    "--output-dir", str(tmp_path / "out")])
    assert code == EXIT_CONFIG


def test_unknown_config_key_rejected(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[mesh]\nnx = 16\nbogus_key = 1\n")
    code = run_cli(["channel", "--config", str(bad),
                    "--output-dir", str(tmp_path / "out")])
    assert code == EXIT_CONFIG


def test_unknown_config_section_rejected(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[nonsense]\nkey = 1\n")
    with pytest.raises(ConfigError):
        load_config(str(bad), {})


def test_flag_overrides_config_file(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[mesh]\nnx = 16\n")
    cfg = load_config(str(ini), {("mesh", "nx"): 32})
    assert cfg["mesh"]["nx"] == "32"


def test_transforms_selftest_passes(tmp_path, capsys):
    out = tmp_path / "ts"
    assert run_cli(["transforms-selftest", "--output-dir", str(out)]) \
        == EXIT_OK
    assert (out / "transforms-selftest.csv").exists()
    assert (out / "config.ini").exists()


def test_dump_matrix_writes_dense_csv(tmp_path, capsys):
    out = tmp_path / "dm"
    code = run_cli(["dump-matrix", "--name", "mass_dir", "--nx", "12",
                    "--output-dir", str(out)])
    assert code == EXIT_OK
    dense = np.loadtxt(out / "mass_dir-12.csv", delimiter=",")
    assert dense.shape == (11, 11)
    assert np.isclose(dense[0, 0], 1.5 * np.pi)


def test_dump_matrix_unknown_name(tmp_path):
    code = run_cli(["dump-matrix", "--name", "no_such", "--nx", "12",
                    "--output-dir", str(tmp_path / "dm")])
    assert code == EXIT_CONFIG


def test_channel_run_produces_outputs(tmp_path, capsys):
    out = tmp_path / "ch"
    code = run_cli(["channel", "--nx", "16", "--ny", "8", "--nz", "8",
                    "--steps", "10", "--output-dir", str(out)])
    assert code == EXIT_OK
    for name in ("statistics.csv", "mean_profile.csv",
                 "checkpoint-final.bin", "config.ini", "channel.png"):
        assert (out / name).exists(), name
    stats = (out / "statistics.csv").read_text().strip().split("\n")
    assert stats[0] == "t,flux,beta,e_kin"
    assert len(stats) > 1


def test_channel_rerun_from_echoed_config_is_identical(tmp_path, capsys):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli(["channel", "--nx", "16", "--ny", "8", "--nz", "8",
                    "--steps", "10", "--output-dir", str(out1)]) == EXIT_OK
    assert run_cli(["channel", "--config", str(out1 / "config.ini"),
                    "--output-dir", str(out2)]) == EXIT_OK
    assert (out1 / "statistics.csv").read_text() \
        == (out2 / "statistics.csv").read_text()
    assert (out1 / "checkpoint-final.bin").read_bytes() \
        == (out2 / "checkpoint-final.bin").read_bytes()


def test_channel_resume_from_checkpoint(tmp_path, capsys):
    out1 = tmp_path / "first"
    assert run_cli(["channel", "--nx", "16", "--ny", "8", "--nz", "8",
                    "--steps", "10", "--output-dir", str(out1)]) == EXIT_OK
    out2 = tmp_path / "second"
    code = run_cli(["channel", "--nx", "16", "--ny", "8", "--nz", "8",
                    "--steps", "10", "--output-dir", str(out2),
                    "--checkpoint", str(out1 / "checkpoint-final.bin")])
    assert code == EXIT_OK
    stats = (out2 / "statistics.csv").read_text().strip().split("\n")
    # times continue past the first run's end
    t_first = float(stats[1].split(",")[0])
    assert t_first > 0.010


def test_checkpoint_mesh_mismatch_rejected(tmp_path, capsys):
    out1 = tmp_path / "first"
    assert run_cli(["channel", "--nx", "16", "--ny", "8", "--nz", "8",
                    "--steps", "5", "--output-dir", str(out1)]) == EXIT_OK
    code = run_cli(["channel", "--nx", "32", "--ny", "8", "--nz", "8",
                    "--steps", "5", "--output-dir", str(tmp_path / "x"),
                    "--checkpoint", str(out1 / "checkpoint-final.bin")])
    assert code == EXIT_CONFIG


def test_reference_profile_comparison(tmp_path, capsys):
    ref = tmp_path / "ref.txt"
    x = np.linspace(-1, 1, 33)
    np.savetxt(ref, np.column_stack([x, 1 - x ** 2]))
    out = tmp_path / "ch"
    code = run_cli(["channel", "--nx", "16", "--ny", "8", "--nz", "8",
                    "--steps", "5", "--output-dir", str(out),
                    "--reference-profile", str(ref)])
    assert code == EXIT_OK
    assert (out / "profile-comparison.png").exists()


def test_roundoff_cli_csv(tmp_path, capsys):
    out = tmp_path / "ro"
    code = run_cli(["roundoff", "--nx", "64", "--z", "0,200",
                    "--runs", "3", "--output-dir", str(out)])
    assert code == EXIT_OK
    lines = (out / "roundoff.csv").read_text().strip().split("\n")
    assert lines[0].startswith("operator,")
    assert len(lines) == 1 + 2 * 2  # two operators x two wavenumbers
    assert (out / "roundoff.png").exists()


def test_thread_env_override(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CHEBCHAN_THREADS", "2")
    out = tmp_path / "ts"
    assert run_cli(["transforms-selftest", "--output-dir", str(out)]) \
        == EXIT_OK
    text = (out / "config.ini").read_text()
    assert "threads = 2" in text


def test_timing_commands_force_single_thread(tmp_path, capsys):
    out = tmp_path / "bench"
    code = run_cli(["bench-solve", "--nx", "64,128", "--threads", "8",
                    "--output-dir", str(out)])
    assert code in (EXIT_OK, 3)  # tiny sizes may miss the scaling band
    assert "threads = 1" in (out / "config.ini").read_text()
