"""Command-line interface: validate, simulate, oracle."""

import json
import math
import shutil
import subprocess

from coprop.cli import main
from coprop.harness import config_identity, load_config

TINY = {
    "n_zeta_steps": 10,
    "ensemble_size": 2,
    "quantum_noise": "off",
    "sweep": {"mode": "single"},
}


def write_config(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_validate_prints_resolved_config(tmp_path, capsys):
    path = write_config(tmp_path, TINY)
    assert main(["validate", str(path)]) == 0
    out, err = capsys.readouterr()
    resolved = json.loads(out)
    assert resolved["ensemble_size"] == 2
    assert config_identity(load_config(resolved)) == config_identity(load_config(TINY))
    assert "1 points" in err and "2 trajectories" in err


def test_validate_rejects_unknown_keys(tmp_path, capsys):
    path = write_config(tmp_path, {"beta3": 1.0})
    assert main(["validate", str(path)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "unknown key: beta3" in err


def test_oracle_quick(capsys):
    assert main(["oracle", "--quick"]) == 0
    assert "5/5" in capsys.readouterr().out


def test_simulate_writes_artifacts(tmp_path, capsys):
    path = write_config(tmp_path, TINY)
    out_dir = tmp_path / "run"
    assert main(["simulate", str(path), "--out", str(out_dir)]) == 0
    out = capsys.readouterr().out
    assert "C=" in out and "1 rows" in out
    assert (out_dir / "results.csv").exists()
    assert (out_dir / "manifest.json").exists()


def test_simulate_seed_override(tmp_path):
    path = write_config(tmp_path, TINY)
    out_dir = tmp_path / "seeded"
    assert main(["simulate", str(path), "--out", str(out_dir), "--seed", "7"]) == 0
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["config"]["master_seed"] == 7
    assert manifest["rows"][0]["seed"] == 7


def test_simulate_desk_scale(tmp_path, capsys):
    data = dict(TINY, sweep={"mode": "channel", "channels": [35, 45]})
    path = write_config(tmp_path, data)
    out_dir = tmp_path / "desk"
    assert main(["simulate", str(path), "--out", str(out_dir), "--desk-scale"]) == 0
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["config"]["sweep"]["channels"] == [35]  # 45 is beyond +-6
    assert "1 rows" in capsys.readouterr().out


def test_simulate_reports_point_failures(tmp_path, capsys):
    data = dict(
        TINY,
        grid={"max_n_tau": 4096},
        sweep={"mode": "pulse_width",
               "t0_values": [2e-12, math.sqrt(2.0) * 100e-12]},
    )
    path = write_config(tmp_path, data)
    assert main(["simulate", str(path), "--out", str(tmp_path / "run")]) == 1
    out = capsys.readouterr().out
    assert "ERROR GridSizeError" in out
    assert "2 rows" in out


def test_simulate_refuses_foreign_directory_without_force(tmp_path, capsys):
    path = write_config(tmp_path, TINY)
    out_dir = tmp_path / "run"
    assert main(["simulate", str(path), "--out", str(out_dir)]) == 0
    capsys.readouterr()

    other = write_config(tmp_path, dict(TINY, master_seed=7), name="other.json")
    assert main(["simulate", str(other), "--out", str(out_dir)]) == 2
    assert capsys.readouterr().err.startswith("error:")
    assert main(["simulate", str(other), "--out", str(out_dir), "--force"]) == 0


def test_console_script_installed():
    exe = shutil.which("coprop")
    assert exe is not None
    proc = subprocess.run([exe, "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("coprop ")
