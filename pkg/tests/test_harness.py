import csv
import dataclasses
import math

import numpy as np
import pytest

from nfmmse import harness
from nfmmse.config import ExperimentConfig, desk_scale
from nfmmse.errors import FullRankModel
from nfmmse.harness import SUMMARY_HEADER, run_sweep, trial_seed


def small_cfg(**kw):
    base = desk_scale(ExperimentConfig())
    kw.setdefault("trials", 8)
    return dataclasses.replace(base, **kw)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestSeeds:
    def test_distinct_roles(self):
        assert trial_seed(1, 0, 0) != trial_seed(1, 0, 1)
        assert trial_seed(1, 0, 0) != trial_seed(1, 1, 0)
        assert trial_seed(1, 3, 1) == trial_seed(1, 3, 1)


class TestRunSweep:
    def test_csv_outputs(self, tmp_path):
        cfg = small_cfg(sweep_variable="transmit_power_dbm", sweep_values=(-4.0, 6.0))
        paths = run_sweep(cfg).write(tmp_path)
        rows = read_csv(paths["nmse"])
        assert tuple(rows[0]) == SUMMARY_HEADER
        assert len(rows) == 1 + 2 * 5
        assert {r[1] for r in rows[1:]} == set(cfg.estimators)
        assert read_csv(paths["chordal"])[0][:2] == ["sweep_value", "subspace"]
        assert len(read_csv(paths["trials"])) == 1 + 2 * 5 * 8

    def test_bit_identical_reruns(self, tmp_path):
        cfg = small_cfg()
        a = run_sweep(cfg).write(tmp_path / "a")
        b = run_sweep(cfg).write(tmp_path / "b")
        for key in a:
            assert open(a[key]).read() == open(b[key]).read()

    def test_thread_count_independent(self, tmp_path):
        cfg = small_cfg(trials=12)
        a = run_sweep(cfg, threads=1).write(tmp_path / "a")
        b = run_sweep(cfg, threads=3).write(tmp_path / "b")
        for key in a:
            assert open(a[key]).read() == open(b[key]).read()

    def test_disk_cache_identical(self, tmp_path):
        cfg = small_cfg()
        cold = run_sweep(cfg, cache_dir=tmp_path / "cache").write(tmp_path / "cold")
        assert any((tmp_path / "cache").glob("*.bin"))
        warm = run_sweep(cfg, cache_dir=tmp_path / "cache").write(tmp_path / "warm")
        for key in cold:
            assert open(cold[key]).read() == open(warm[key]).read()

    def test_common_random_numbers(self):
        # Same noise draws at every power: LS NMSE scales exactly with 1/p.
        cfg = small_cfg(estimators=("ls",), sweep_variable="transmit_power_dbm",
                        sweep_values=(-4.0, 6.0))
        lo, hi = run_sweep(cfg).points
        np.testing.assert_allclose(lo.nmse_values("ls") / hi.nmse_values("ls"), 10.0, rtol=1e-9)

    def test_failures_counted(self, monkeypatch):
        real = harness.estimate_nuisances
        calls = {"n": 0}

        def flaky(history, refined):
            calls["n"] += 1
            if calls["n"] % 2:
                raise FullRankModel("forced")
            return real(history, refined)

        monkeypatch.setattr(harness, "estimate_nuisances", flaky)
        pt = run_sweep(small_cfg(trials=6)).points[0]
        assert pt.failures == {"param": 3, "samp": 3, "iso": 3}
        assert len(pt.records["param"]) == 3 and len(pt.records["mmse"]) == 6
        assert all("forced" in msg for _, msg in pt.errors["param"])

    def test_records(self):
        pt = run_sweep(small_cfg(trials=4)).points[0]
        rec = pt.records["param"][0]
        assert len(rec.location_error) == 3
        assert set(rec.nuisance_errors) == {"sigma_w2", "beta"}
        assert pt.records["ls"][0].location_error is None
        assert pt.pooled_nmse("ls") > 0

    @pytest.mark.slow
    def test_power_sweep_monotone(self):
        cfg = small_cfg(trials=200, sweep_variable="transmit_power_dbm",
                        sweep_values=(-14.0, -9.0, -4.0, 1.0, 6.0))
        result = run_sweep(cfg)
        for est in cfg.estimators:
            medians = [np.median(pt.nmse_values(est)) for pt in result.points]
            assert all(b <= a for a, b in zip(medians, medians[1:])), (est, medians)

    @pytest.mark.slow
    def test_spread_sweep_param_nondecreasing(self):
        cfg = small_cfg(trials=200, estimators=("param",), sweep_variable="assumed_delta_theta_deg",
                        sweep_values=(2.0, 5.0, 10.0, 20.0, 45.0, 90.0))
        medians = [np.median(pt.nmse_values("param")) for pt in run_sweep(cfg).points]
        assert all(b >= a for a, b in zip(medians, medians[1:])), medians

    def test_threads_env(self, monkeypatch):
        monkeypatch.setenv("NFMMSE_THREADS", "3")
        assert harness.default_threads() == 3
        monkeypatch.setenv("NFMMSE_THREADS", "x")
        assert harness.default_threads() == 1
