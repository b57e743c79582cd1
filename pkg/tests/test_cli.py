import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from blumecapel.cli import main
from blumecapel.config import parse_config
from blumecapel.errors import ConfigError
from blumecapel.model import load_snapshot

MINIMAL = """
J = 1.0
lambda = 1.4
h = 0.8
L = 6
beta = 2.0
"""


def test_parse_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.J == 1.0 and cfg.lam == 1.4 and cfg.h == 0.8
    assert cfg.L == 6 and cfg.beta == 2.0
    assert cfg.seed == 0 and cfg.stride == 100 and cfg.boundary_mode == "zero"
    assert cfg.replicas == 1 and cfg.start == "minus1" and cfg.target == "plus1"


def test_parse_config_beta_grid_and_comments():
    cfg = parse_config(MINIMAL + "beta_grid = 1.5, 2.0, 2.5  # sweep\n")
    assert cfg.beta_grid == (1.5, 2.0, 2.5)


def test_parse_config_errors_name_the_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("J = 1.0\nlambda = x\n")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(MINIMAL + "bogus = 3\n")
    with pytest.raises(ConfigError, match="missing required"):
        parse_config("J = 1.0\n")
    with pytest.raises(ConfigError, match="strictly increasing"):
        parse_config(MINIMAL + "beta_grid = 2.0, 1.5\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(MINIMAL + "J = 2.0\n")
    with pytest.raises(ConfigError, match="target"):
        parse_config(MINIMAL + "target = nowhere\n")


def _write(tmp_path: Path, extra: str = "") -> Path:
    cfg = tmp_path / "run.cfg"
    cfg.write_text(MINIMAL + f"out_dir = {tmp_path / 'out'}\n" + extra)
    return cfg


def test_validate_exit_codes(tmp_path):
    cfg = _write(tmp_path)
    assert main(["validate", "--config", str(cfg)]) == 2  # desk params fail the gates
    good = tmp_path / "good.cfg"
    good.write_text("J = 1.0\nlambda = 0.017\nh = 0.01\nL = 6\nbeta = 2.0\n")
    assert main(["validate", "--config", str(good)]) == 0
    degenerate = tmp_path / "deg.cfg"
    degenerate.write_text("J = 1.0\nlambda = 0.5\nh = 0.5\nL = 6\nbeta = 2.0\n")
    assert main(["validate", "--config", str(degenerate)]) == 2


def test_parse_error_exit_code(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("J = 1.0\nlambda = zz\nh = 0.8\nL = 6\nbeta = 2.0\n")
    assert main(["validate", "--config", str(bad)]) == 1
    assert main(["validate"]) == 1  # missing --config
    assert main(["energy", "--config", str(tmp_path / "missing.cfg")]) == 1


def test_energy_command(tmp_path, capsys):
    cfg = _write(tmp_path)
    assert main(["energy", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "H(+1)" in out and "gamma" in out


def test_snapshot_round_trip_via_cli(tmp_path, capsys):
    cfg = _write(tmp_path)
    assert main(["snapshot", "--config", str(cfg), "--which", "sigma_s", "--no-timestamp"]) == 0
    eta, meta = load_snapshot(tmp_path / "out" / "sigma_s.snap")
    assert eta.counts() == (29, 4, 3)
    assert meta == {"J": 1.0, "lam": 1.4, "h": 0.8}
    assert main(["snapshot", "--config", str(cfg), "--which", "sigma_F:2,3"]) == 0
    eta, _ = load_snapshot(tmp_path / "out" / "sigma_F_2x3.snap")
    assert eta.counts()[2] == 6
    assert main(["snapshot", "--config", str(cfg), "--which", "frame:1"]) == 0
    assert main(["snapshot", "--config", str(cfg), "--which", "nonsense"]) == 1
    # does-not-fit surfaces as a check failure, not a crash
    assert main(["snapshot", "--config", str(cfg), "--which", "frame:6"]) == 2


def test_simulate_deterministic_bytes(tmp_path):
    cfg = _write(tmp_path, "seed = 9\nmax_steps = 20000\nstride = 500\n")
    assert main(["simulate", "--config", str(cfg), "--no-timestamp"]) in (0, 3)
    first = (tmp_path / "out" / "trajectory.csv").read_bytes()
    assert main(["simulate", "--config", str(cfg), "--no-timestamp"]) in (0, 3)
    second = (tmp_path / "out" / "trajectory.csv").read_bytes()
    assert first == second
    header = first.decode().splitlines()
    assert any("rng: PCG64" in line for line in header[:6])
    assert "step,energy,n_plus,n_zero,n_minus" in header[:8]


def test_simulate_timestamp_suppression(tmp_path):
    cfg = _write(tmp_path, "seed = 9\nmax_steps = 5000\n")
    main(["simulate", "--config", str(cfg)])
    with_ts = (tmp_path / "out" / "trajectory.csv").read_text()
    assert "timestamp:" in with_ts
    main(["simulate", "--config", str(cfg), "--no-timestamp"])
    without = (tmp_path / "out" / "trajectory.csv").read_text()
    assert "timestamp:" not in without


def test_exit_times_small_run(tmp_path, capsys):
    # small box, quick barrier crossings
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "J = 1.0\nlambda = 1.4\nh = 0.8\nL = 5\nbeta = 2.0\n"
        f"out_dir = {tmp_path / 'out'}\n"
        "beta_grid = 1.2, 1.6\nreplicas = 4\nseed = 3\n"
    )
    assert main(["exit-times", "--config", str(cfg), "--no-timestamp"]) == 0
    out = capsys.readouterr().out
    assert "fitted slope" in out and "theoretical" in out
    fit = (tmp_path / "out" / "arrhenius_fit.csv").read_text()
    assert "beta,log_mean_tau,mean_log_tau,se_log_mean,n_timeouts" in fit
    assert (tmp_path / "out" / "exit_times_beta1.2.csv").exists()
    assert (tmp_path / "out" / "exit_times_beta1.6.csv").exists()


def test_exit_times_refuses_degenerate_inputs(tmp_path):
    cfg = _write(tmp_path, "beta_grid = 1.5\nreplicas = 2\n")
    assert main(["exit-times", "--config", str(cfg)]) == 1  # single beta
    cfg2 = _write(tmp_path, "beta_grid = 1.5, 2.0\nstart = plus1\n")
    assert main(["exit-times", "--config", str(cfg2)]) == 1  # start inside target


def test_exit_times_all_timeouts(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "J = 1.0\nlambda = 1.4\nh = 0.8\nL = 8\nbeta = 2.0\n"
        f"out_dir = {tmp_path / 'out'}\n"
        "beta_grid = 3.0, 4.0\nreplicas = 2\nmax_steps = 50\n"
    )
    assert main(["exit-times", "--config", str(cfg), "--no-timestamp"]) == 3
    # partial data preserved
    assert (tmp_path / "out" / "exit_times_beta3.csv").exists()


def test_nucleation_map(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "J = 1.0\nlambda = 1.4\nh = 0.8\nL = 5\nbeta = 2.0\n"
        f"out_dir = {tmp_path / 'out'}\n"
        "replicas = 6\nseed = 11\n"
    )
    assert main(["nucleation-map", "--config", str(cfg), "--no-timestamp"]) == 0
    rows = [
        line
        for line in (tmp_path / "out" / "nucleation_map.csv").read_text().splitlines()
        if line and not line.startswith("#") and not line.startswith("x,")
    ]
    total = sum(int(r.split(",")[2]) for r in rows)
    out = capsys.readouterr().out
    assert "corner fraction" in out
    assert total == 6  # histogram mass = replicas - timeouts


def test_landscape_verify(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "J = 1.0\nlambda = 1.4\nh = 0.8\nL = 3\nbeta = 2.0\n"
        f"out_dir = {tmp_path / 'out'}\n"
    )
    assert main(["landscape-verify", "--config", str(cfg), "--no-timestamp"]) == 0
    checks = (tmp_path / "out" / "landscape_checks.csv").read_text()
    assert "flip_table_exactness,pass" in checks
    assert "bottleneck_vs_threshold,pass" in checks
    # deliberate fault must be caught
    assert main(["landscape-verify", "--config", str(cfg), "--inject-fault"]) == 2


def test_landscape_verify_high_field_branch(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "J = 1.0\nlambda = 0.8\nh = 1.4\nL = 3\nbeta = 2.0\n"
        f"out_dir = {tmp_path / 'out'}\n"
    )
    assert main(["landscape-verify", "--config", str(cfg), "--no-timestamp"]) == 0
    checks = (tmp_path / "out" / "landscape_checks.csv").read_text()
    assert "local_minimum_classification,pass" in checks
    assert "reference_path_barrier,skip" in checks


def test_console_entry_point():
    result = subprocess.run(
        [sys.executable, "-m", "blumecapel.cli", "--version"],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert "blumecapel" in result.stdout
