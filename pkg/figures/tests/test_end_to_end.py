"""Render figures from real simulation runs, driving the simulator only
through its command-line interface and CSV output."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from gmlab_figures.cli import main


def run_simulator(tmp_path, doc):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(doc))
    proc = subprocess.run(
        [sys.executable, "-m", "gmlab.cli", "run", str(config)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return Path(doc["output_dir"])


@pytest.fixture(scope="module")
def phase_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("phase")
    return run_simulator(
        tmp,
        {
            "experiment": "PhaseTransition",
            "grid": {"beta": [0.5, 1.0, 2.0], "gamma": [0.5], "n": [128], "regime": ["boundary"]},
            "replicates": 1500,
            "master_seed": 31,
            "output_dir": str(tmp / "out"),
        },
    )


@pytest.fixture(scope="module")
def decay_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("decay")
    return run_simulator(
        tmp,
        {
            "experiment": "TVDecayRates",
            "grid": {"beta": [0.5], "gamma": [0.5], "n": [64, 128, 256, 512], "regime": ["boundary"]},
            "replicates": 1500,
            "master_seed": 32,
            "output_dir": str(tmp / "out"),
        },
    )


def render_spec(tmp_path, run_dir, kind, options=None):
    spec_path = tmp_path / f"{kind}.json"
    spec_path.write_text(
        json.dumps({"kind": kind, "input": "results.csv", "output": f"{kind}.png", "options": options or {}})
    )
    rc = main(["render", "--spec", str(spec_path), "--in", str(run_dir), "--out", str(tmp_path)])
    return rc, tmp_path / f"{kind}.png"


def test_panel_from_real_phase_transition(phase_run, tmp_path):
    rc, out = render_spec(tmp_path, phase_run, "panel")
    assert rc == 0 and out.exists()


def test_decay_from_real_sweep(decay_run, tmp_path):
    rc, out = render_spec(tmp_path, decay_run, "decay")
    assert rc == 0 and out.exists()


def test_scaling_from_real_mixing_sweep(tmp_path):
    run_dir = run_simulator(
        tmp_path,
        {
            "experiment": "MixingTimeSweep",
            "grid": {"beta": [1.0], "gamma": [0.5], "n": [50, 100, 200, 400], "regime": ["boundary"]},
            "master_seed": 33,
            "output_dir": str(tmp_path / "out"),
        },
    )
    rc, out = render_spec(tmp_path, run_dir, "scaling")
    assert rc == 0 and out.exists()
