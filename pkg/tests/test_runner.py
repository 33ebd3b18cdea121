import json

import numpy as np
import pytest

from gmlab.config import validate_config
from gmlab.runner import AGGREGATE_N, run


def make_config(tmp_path, name, **overrides):
    doc = {
        "experiment": "VarianceValidation",
        "grid": {"beta": [1.0], "gamma": [0.5], "n": [80], "regime": ["boundary"]},
        "spec": {"coeffs": {"2": 1.0}},
        "replicates": 2000,
        "master_seed": 11,
        "output_dir": str(tmp_path / name),
    }
    doc.update(overrides)
    return validate_config(json.dumps(doc))


class TestRunBasics:
    def test_writes_csv_and_manifest(self, tmp_path):
        cfg = make_config(tmp_path, "a")
        rows = run(cfg)
        out = tmp_path / "a"
        assert (out / "results.csv").exists()
        assert (out / "manifest.json").exists()
        body = (out / "results.csv").read_bytes()
        assert body.startswith(b"experiment,beta,gamma,n,regime,spec,metric,value,stderr,detail,seed\r\n")
        assert len(body.split(b"\r\n")) == len(rows) + 2  # header + rows + trailing newline

    def test_manifest_schema(self, tmp_path):
        cfg = make_config(tmp_path, "m")
        run(cfg)
        manifest = json.loads((tmp_path / "m" / "manifest.json").read_text())
        for key in ("schema_version", "gmlab_version", "experiment", "config", "master_seed",
                    "started_utc", "finished_utc", "wall_time_s", "result_rows"):
            assert key in manifest
        assert manifest["schema_version"] == 1

    def test_rows_sorted_and_unique(self, tmp_path):
        cfg = make_config(
            tmp_path,
            "s",
            grid={"beta": [0.5, 1.0], "gamma": [0.5], "n": [50, 80], "regime": ["boundary"]},
        )
        rows = run(cfg)
        keys = [r.key() for r in rows]
        assert keys == sorted(keys)
        assert len(keys) == len(set(keys))

    def test_var_zscore_passes_at_small_scale(self, tmp_path):
        cfg = make_config(tmp_path, "z", replicates=5000)
        rows = run(cfg)
        z = next(r for r in rows if r.metric == "var_zscore")
        assert abs(z.value) <= 4
        assert "pass=1" in z.detail


class TestReproducibility:
    def test_byte_identical_reruns(self, tmp_path):
        cfg1 = make_config(tmp_path, "r1")
        cfg2 = make_config(tmp_path, "r2")
        run(cfg1)
        run(cfg2)
        b1 = (tmp_path / "r1" / "results.csv").read_bytes()
        b2 = (tmp_path / "r2" / "results.csv").read_bytes()
        assert b1 == b2

    def test_threads_do_not_change_output(self, tmp_path):
        base = {"grid": {"beta": [0.5, 1.0, 2.0], "gamma": [0.5], "n": [60], "regime": ["boundary"]},
                "replicates": 1500}
        cfg1 = make_config(tmp_path, "t1", **base)
        cfg2 = make_config(tmp_path, "t2", threads=3, **base)
        run(cfg1)
        run(cfg2)
        assert (tmp_path / "t1" / "results.csv").read_bytes() == (tmp_path / "t2" / "results.csv").read_bytes()

    def test_seed_changes_output(self, tmp_path):
        cfg1 = make_config(tmp_path, "s1")
        cfg2 = make_config(tmp_path, "s2", master_seed=12)
        run(cfg1)
        run(cfg2)
        assert (tmp_path / "s1" / "results.csv").read_bytes() != (tmp_path / "s2" / "results.csv").read_bytes()


class TestExperimentRows:
    def test_phase_transition_rows(self, tmp_path):
        cfg = make_config(
            tmp_path,
            "pt",
            experiment="PhaseTransition",
            grid={"beta": [0.5, 1.0, 2.0], "gamma": [0.5], "n": [128], "regime": ["boundary"]},
            replicates=1500,
        )
        rows = run(cfg)
        metrics = {r.metric for r in rows}
        assert {"ks_vs_normal", "ks_vs_tempered", "ks_vs_degenerate", "best_candidate_is_expected"} <= metrics
        assert len([r for r in rows if r.metric == "ks_vs_normal"]) == 3

    def test_tv_decay_aggregate_rows(self, tmp_path):
        cfg = make_config(
            tmp_path,
            "tv",
            experiment="TVDecayRates",
            grid={"beta": [0.5], "gamma": [0.5], "n": [32, 64, 128, 256], "regime": ["boundary"]},
            replicates=1500,
        )
        rows = run(cfg)
        slope_rows = [r for r in rows if r.metric == "fit_slope"]
        assert len(slope_rows) == 1
        assert slope_rows[0].n == AGGREGATE_N
        assert "reference=-0.25" in slope_rows[0].detail
        r2_rows = [r for r in rows if r.metric == "fit_r2"]
        assert len(r2_rows) == 1

    def test_mixing_sweep_rows(self, tmp_path):
        cfg = make_config(
            tmp_path,
            "mx",
            experiment="MixingTimeSweep",
            grid={"beta": [1.0], "gamma": [0.5], "n": [50, 100, 200], "regime": ["boundary"]},
        )
        rows = run(cfg)
        t_rows = [r for r in rows if r.metric == "t_mix"]
        assert len(t_rows) == 3
        assert all(r.value >= 1 for r in t_rows)
        ok_rows = [r for r in rows if r.metric == "sandwich_lower_ok"]
        assert all(r.value == 1.0 for r in ok_rows)
        slope = next(r for r in rows if r.metric == "fit_slope")
        assert slope.value == pytest.approx(1.0, abs=0.15)

    def test_covariance_check_passes(self, tmp_path):
        cfg = make_config(
            tmp_path,
            "cv",
            experiment="CovarianceCheck",
            grid={"beta": [1.0], "gamma": [1.0], "n": [32], "regime": ["boundary"]},
            replicates=4000,
        )
        rows = run(cfg)
        ratio = next(r for r in rows if r.metric == "cov_max_tol_ratio")
        assert ratio.value <= 1.0

    def test_gamma_continuity_rows(self, tmp_path):
        cfg = make_config(
            tmp_path,
            "gc",
            experiment="GammaContinuity",
            grid={"beta": [1.0], "gamma": [0.5, 1.0], "n": [32], "regime": ["boundary"]},
            replicates=2000,
        )
        rows = run(cfg)
        pert = [r for r in rows if r.metric == "ks_gamma_perturbed"]
        assert len(pert) == 2
        crit = 1.63 * (2 / 2000) ** 0.5
        assert all(r.value <= crit for r in pert)

    def test_gamma_continuity_requires_single_order(self, tmp_path):
        cfg = make_config(
            tmp_path,
            "gc2",
            experiment="GammaContinuity",
            spec={"coeffs": {"1": 1.0, "2": 1.0}},
            grid={"beta": [1.0], "gamma": [0.5], "n": [32], "regime": ["boundary"]},
            replicates=500,
        )
        with pytest.raises(ValueError, match="single-order"):
            run(cfg)

    def test_identity_suite_all_within_tolerance(self, tmp_path):
        cfg = make_config(tmp_path, "id", experiment="IdentitySuite")
        rows = run(cfg)
        by_metric = {r.metric: r for r in rows}
        assert by_metric["orthogonality_max_abs_err"].value < 1e-9
        assert by_metric["multiplication_identity_max_err"].value < 1e-9
        assert by_metric["initial_state_identity_max_err"].value < 1e-9
        assert by_metric["tempered_cov_unit_time_max_err"].value < 1e-9
        assert by_metric["norm_constant_q1_gamma1_err"].value < 1e-12
        assert by_metric["sqrt_sum_bound_violations"].value == 0.0
        assert by_metric["contraction_edge_maximality_ok"].value == 1.0
        assert by_metric["contraction_log_convexity_ok"].value == 1.0

    def test_dump_samples(self, tmp_path):
        cfg = make_config(tmp_path, "dump", dump_samples=True, replicates=500)
        run(cfg)
        samples = list((tmp_path / "dump" / "samples").glob("*.csv"))
        assert samples
        arr = np.loadtxt(samples[0], delimiter=",")
        assert arr.shape == (500,)
