import json
import subprocess
import sys
import time
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parents[1]


def run_cli(*args, cwd, extra_env=None):
    env = {"PYTHONPATH": str(REPO / "src"), "PATH": "/usr/bin:/bin:/usr/local/bin"}
    if extra_env:
        env.update(extra_env)
    return subprocess.run(
        [sys.executable, "-m", "fhjm.cli", *args],
        capture_output=True, text=True, cwd=cwd, env=env,
    )


def smoke_config(**overrides):
    cfg = {
        "model": {"type": "ho-lee", "sigma": 0.01},
        "hurst": 0.7,
        "grids": {"t_star": 1.0, "n_steps": 64, "x_max": 1.0, "m_steps": 64},
        "initial_curve": {"type": "flat", "rate": 0.03},
        "mc": {"n_paths": 100, "seed": 42, "method": "cholesky", "batch_size": 64},
        "drift": {"theta_cells": 256},
    }
    cfg.update(overrides)
    return cfg


@pytest.fixture
def tmp_config(tmp_path):
    def write(cfg, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(cfg))
        return path

    return write


def test_simulate_smoke_under_ten_seconds(tmp_path, tmp_config):
    path = tmp_config(smoke_config())
    start = time.time()
    result = run_cli("simulate", str(path), "--out", str(tmp_path / "out"), cwd=tmp_path)
    elapsed = time.time() - start
    assert result.returncode == 0, result.stderr
    assert elapsed < 10.0
    out = tmp_path / "out"
    for name in ("paths.csv", "forward.csv", "bonds.csv", "manifest.json"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 42
    assert manifest["config_sha256"]
    assert "numpy" in manifest["versions"]


def test_simulate_byte_identical_and_thread_invariant(tmp_path, tmp_config):
    path = tmp_config(smoke_config())
    for out, extra in (("a", []), ("b", []), ("c", ["--threads", "4"])):
        r = run_cli("simulate", str(path), "--out", str(tmp_path / out), *extra, cwd=tmp_path)
        assert r.returncode == 0, r.stderr
    for name in ("paths.csv", "forward.csv", "bonds.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes()
        assert a == (tmp_path / "c" / name).read_bytes()


def test_config_rejections_exit_code_one(tmp_path, tmp_config):
    bad = smoke_config()
    bad["mc"]["n_paths"] = 0
    r = run_cli("simulate", str(tmp_config(bad, "bad1.json")), "--out", str(tmp_path), cwd=tmp_path)
    assert r.returncode == 1
    assert "n_paths" in r.stderr

    bad2 = smoke_config(hurst=0.4)
    r2 = run_cli("simulate", str(tmp_config(bad2, "bad2.json")), "--out", str(tmp_path), cwd=tmp_path)
    assert r2.returncode == 1
    assert "hurst" in r2.stderr

    bad3 = smoke_config(grids={"t_star": 1.0, "n_steps": 64, "x_max": 1.0, "m_steps": 48})
    r3 = run_cli("simulate", str(tmp_config(bad3, "bad3.json")), "--out", str(tmp_path), cwd=tmp_path)
    assert r3.returncode == 1

    r4 = run_cli("simulate", str(tmp_path / "missing.json"), "--out", str(tmp_path), cwd=tmp_path)
    assert r4.returncode == 1


def test_drift_command_error_summaries(tmp_path, tmp_config):
    path = tmp_config(smoke_config())
    r = run_cli("drift", str(path), "--out", str(tmp_path / "d1"), cwd=tmp_path)
    assert r.returncode == 0, r.stderr
    summary = json.loads((tmp_path / "d1" / "drift_summary.json").read_text())
    assert summary["max_relative_error_vs_closed_form"] <= 1e-6

    hw = smoke_config(model={"type": "hull-white", "sigma": 0.01, "decay": 1.0})
    hw["drift"]["theta_cells"] = 1024
    r2 = run_cli("drift", str(tmp_config(hw, "hw.json")), "--out", str(tmp_path / "d2"), cwd=tmp_path)
    assert r2.returncode == 0, r2.stderr
    summary2 = json.loads((tmp_path / "d2" / "drift_summary.json").read_text())
    assert summary2["max_relative_error_vs_closed_form"] <= 1e-6


def test_drift_command_single_step_grid(tmp_path, tmp_config):
    cfg = smoke_config(grids={"t_star": 1.0, "n_steps": 1, "x_max": 1.0, "m_steps": 1})
    r = run_cli("drift", str(tmp_config(cfg)), "--out", str(tmp_path / "d"), cwd=tmp_path)
    assert r.returncode == 0, r.stderr
    rows = (tmp_path / "d" / "drift.csv").read_text().strip().split("\n")
    header, data = rows[0], rows[1:]
    assert header == "t,x,value"
    zero_rows = [line for line in data if line.startswith("0,")]
    assert all(line.split(",")[2] == "0" for line in zero_rows)


def test_check_command(tmp_path, tmp_config):
    cfg = smoke_config()
    cfg["mc"]["n_paths"] = 400
    cfg["check"] = {
        "pairs": [[0.25, 0.75], [0.5, 1.0]],
        "oscillation": {"thresholds": [0.05, 10.0], "taus": [0.0]},
    }
    r = run_cli("check", str(tmp_config(cfg)), "--out", str(tmp_path / "c"), cwd=tmp_path)
    assert r.returncode == 0, r.stderr
    report = json.loads((tmp_path / "c" / "check_report.json").read_text())
    assert report["drift_identity_pass"]
    assert report["quasi_martingale_pass"]
    assert report["oscillation"]["frequencies"][0][1] == 1.0  # huge band


def test_check_command_empty_block(tmp_path, tmp_config):
    cfg = smoke_config(check={})
    r = run_cli("check", str(tmp_config(cfg)), "--out", str(tmp_path / "c"), cwd=tmp_path)
    assert r.returncode == 0
    assert json.loads((tmp_path / "c" / "check_report.json").read_text()) == {}


def test_consistency_command_verdicts(tmp_path, tmp_config):
    cfg = smoke_config()
    cfg["consistency"] = {"family": "nelson-siegel", "t_samples": 4, "y_samples": 8, "seed": 7}
    r = run_cli("consistency", str(tmp_config(cfg)), "--out", str(tmp_path / "k1"), cwd=tmp_path)
    assert r.returncode == 0, r.stderr
    rep = json.loads((tmp_path / "k1" / "consistency_report.json").read_text())
    assert rep["verdict"] == "inconsistent"
    assert rep["stable_under_grid_doubling"]
    labels = [w["component"] for w in rep["detail"]["witnesses"]]
    assert "drift linear-in-x term" in labels

    hw = smoke_config(model={"type": "hull-white", "sigma": 0.01, "decay": 1.0})
    hw["consistency"] = {"family": "nelson-siegel", "t_samples": 4, "y_samples": 8, "seed": 7}
    r2 = run_cli("consistency", str(tmp_config(hw, "hw.json")), "--out", str(tmp_path / "k2"), cwd=tmp_path)
    assert r2.returncode == 0
    rep2 = json.loads((tmp_path / "k2" / "consistency_report.json").read_text())
    assert rep2["verdict"] == "inconsistent"

    zero = smoke_config()
    zero["consistency"] = {
        "family": "nelson-siegel", "t_samples": 2, "y_samples": 4,
        "seed": 7, "zero_volatility": True,
    }
    r3 = run_cli("consistency", str(tmp_config(zero, "z.json")), "--out", str(tmp_path / "k3"), cwd=tmp_path)
    assert r3.returncode == 0
    rep3 = json.loads((tmp_path / "k3" / "consistency_report.json").read_text())
    assert rep3["verdict"] == "consistent (trivial)"


def test_portfolio_command(tmp_path, tmp_config):
    cfg = smoke_config(initial_curve={"type": "flat", "rate": 0.0})
    cfg["model"]["sigma"] = 1e-8  # effectively deterministic flat market
    cfg["mc"]["n_paths"] = 3
    cfg["strategies"] = [
        {"name": "buyhold",
         "legs": [{"from": 0.0, "to": 1.0, "atoms": [{"T": 1.0, "w": 1.0}]}]}
    ]
    cfg["costs"] = {"k": [0.0, 0.01]}
    r = run_cli("portfolio", str(tmp_config(cfg)), "--out", str(tmp_path / "p"), cwd=tmp_path)
    assert r.returncode == 0, r.stderr
    summary = json.loads((tmp_path / "p" / "portfolio_summary.json").read_text())
    stats = summary["buyhold"]
    assert stats["total_variation"] == 1.0
    assert stats["ibp_residual_max"] <= 1e-10
    assert stats["final_value"]["0.01"]["mean"] == pytest.approx(-0.02, abs=1e-6)
    assert stats["final_value"]["0"]["mean"] == pytest.approx(0.0, abs=1e-6)
    ledger = (tmp_path / "p" / "ledger_buyhold.csv").read_text().strip().split("\n")
    assert ledger[0] == "path_id,t,gains,cost,liquidation,V"


def test_portfolio_requires_strategies(tmp_path, tmp_config):
    cfg = smoke_config()
    r = run_cli("portfolio", str(tmp_config(cfg)), "--out", str(tmp_path / "p"), cwd=tmp_path)
    assert r.returncode == 1


def test_output_directory_env_var(tmp_path, tmp_config):
    cfg = smoke_config()
    cfg["mc"]["n_paths"] = 5
    path = tmp_config(cfg)
    target = tmp_path / "from_env"
    r = run_cli("drift", str(path), cwd=tmp_path, extra_env={"FHJM_OUT_DIR": str(target)})
    assert r.returncode == 0, r.stderr
    assert (target / "drift.csv").exists()
    assert (target / "manifest.json").exists()


def test_simulate_with_volterra_method(tmp_path, tmp_config):
    cfg = smoke_config()
    cfg["mc"] = {"n_paths": 20, "seed": 9, "method": "volterra", "batch_size": 8}
    r = run_cli("simulate", str(tmp_config(cfg)), "--out", str(tmp_path / "v1"), cwd=tmp_path)
    assert r.returncode == 0, r.stderr
    r2 = run_cli("simulate", str(tmp_config(cfg)), "--out", str(tmp_path / "v2"), cwd=tmp_path)
    assert r2.returncode == 0
    assert (tmp_path / "v1" / "bonds.csv").read_bytes() == (tmp_path / "v2" / "bonds.csv").read_bytes()
