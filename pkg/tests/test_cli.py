import json
from pathlib import Path

import numpy as np
import pytest

from roadrti import io
from roadrti.cli import main

ROOT = Path(__file__).resolve().parents[1]
PERIMETER = str(ROOT / "configs" / "perimeter.json")
ROADSIDE = str(ROOT / "configs" / "roadside_mustang.json")


@pytest.fixture
def cli(tmp_path, monkeypatch):
    monkeypatch.delenv("RTI_SEED", raising=False)

    def run(*argv, name=None):
        extra = ["--out", str(tmp_path)] + (["--run-name", name] if name else [])
        return main(list(argv) + extra)
    return run, tmp_path


def test_plan(cli, capsys):
    run, root = cli
    assert run("plan", "--k", "81", "--d-node", "2", "--heights", "3", name="p") == 0
    rep = json.loads((root / "p/outputs/plan.json").read_text())
    assert rep["scan_time_s"] == pytest.approx(1.755)
    man = json.loads((root / "p/manifest.json").read_text())
    assert man["command"] == "plan" and "plan.json" in json.dumps(man["outputs"])


def test_validation_exits(cli, tmp_path):
    run, root = cli
    assert run("plan", "--bogus") == 1
    assert run("reconstruct", "--config", str(tmp_path / "missing.json"),
               "--measurements", "x.csv") == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"grid": {"n": [1, 1, 1], "d": [1, 1, 1]}, "oops": 1}))
    assert run("simulate", "--config", str(bad), name="bad") == 1
    assert not (root / "bad").exists()


def test_rti_seed_override(cli, monkeypatch):
    run, root = cli
    monkeypatch.setenv("RTI_SEED", "nope")
    assert run("plan", "--k", "2", "--d-node", "1") == 1


def test_simulate_reconstruct_noiseless(cli):
    run, root = cli
    assert run("simulate", "--config", PERIMETER, name="sim") == 0
    out = root / "sim/outputs"
    assert run("reconstruct", "--config", PERIMETER, "--measurements", str(out / "measurements.csv"),
               "--truth", str(out / "truth.csv"), name="rec") == 0
    metrics = json.loads((root / "rec/outputs/metrics.json").read_text())
    assert metrics["rmse"] < 1e-6
    man = json.loads((root / "rec/manifest.json").read_text())
    assert set(man["inputs"]) == {"config.json", "measurements.csv", "truth.csv"}
    assert (root / "rec/inputs").is_dir()


def test_numeric_failure_exit_code(cli):
    run, root = cli
    assert run("simulate", "--config", PERIMETER, name="sim") == 0
    meas = str(root / "sim/outputs/measurements.csv")
    assert run("reconstruct", "--config", PERIMETER, "--measurements", meas,
               "--alpha", "1", "--neg-policy", "pgm", "--mu", "1000", name="div") == 2
    assert not (root / "div").exists()


def test_simulate_is_deterministic(cli):
    run, root = cli
    for name in ("a", "b"):
        assert run("simulate", "--config", ROADSIDE, "--seed", "7", "--calib-scans", "5", name=name) == 0
    for f in ("measurements.csv", "calibration.csv", "raw.csv", "truth.csv"):
        assert (root / "a/outputs" / f).read_bytes() == (root / "b/outputs" / f).read_bytes()
    ma = json.loads((root / "a/manifest.json").read_text())
    mb = json.loads((root / "b/manifest.json").read_text())
    assert ma == mb


def test_calibrate_then_track(cli):
    run, root = cli
    assert run("simulate", "--config", ROADSIDE, "--noise", "none", "--calib-scans", "3", name="s") == 0
    s = root / "s/outputs"
    assert run("calibrate", "--config", ROADSIDE, "--calib", str(s / "calibration.csv"),
               "--raw", str(s / "raw.csv"), name="c") == 0
    assert run("track", "--config", ROADSIDE, "--frames", str(root / "c/outputs/measurements.csv"),
               "--truth", str(s / "truth.csv"), name="t") == 0
    metrics = json.loads((root / "t/outputs/metrics.json").read_text())
    assert metrics["v_hat"] == 4
    assert (root / "t/outputs/image/estimate_side.pgm").is_file()
    assert run("evaluate", "--config", ROADSIDE, "--estimate", str(root / "t/outputs/estimate.csv"),
               "--truth", str(s / "truth.csv"), "--atr", name="e") == 0
    ev = json.loads((root / "e/outputs/metrics.json").read_text())
    assert ev["atr_winner"] == "mustang"
    assert run("render", "--config", ROADSIDE, "--estimate", str(s / "truth.csv"), name="r") == 0
    assert (root / "r/outputs/estimate_z0.pgm").is_file()


def test_repro_rmse_grid_small(cli):
    run, root = cli
    assert run("repro-fig", "9-10", "--realizations", "2", name="f") == 0
    best = json.loads((root / "f/outputs/best.json").read_text())
    assert set(best) == {"trunc-y", "iterative"}
    rows = (root / "f/outputs/rmse_grid.csv").read_text().splitlines()
    assert rows[0] == "pipeline,alpha,beta,rmse" and len(rows) > 1
    assert all(np.isfinite(float(r.split(",")[-1])) for r in rows[1:])
