import csv
import math

import numpy as np
import pytest

from nfmmse.correlation import SpreadTriplet, build_correlation, spread_from_elevation
from nfmmse.errors import EigFailure
from nfmmse.harness import trial_seed
from nfmmse.manifold import SphericalPoint, steering_batch, steering_vector
from nfmmse.music import (
    SearchGrid, SubspaceSplit, locate, locate_many, music_spectrum, sample_covariance,
    spectrum_values, split_snapshots, split_subspaces, write_spectrum_csv,
)
from nfmmse.simulation import PowerModel, generate_snapshots


def nearest_grid_point(grid, p):
    idx = [int(np.abs(ax - v).argmin()) for ax, v in zip(grid.axes, (p.r, p.azimuth, p.elevation))]
    return grid.point(int(np.ravel_multi_index(idx, grid.shape)))


@pytest.fixture(scope="module")
def true_model(desk_cfg):
    ue = desk_cfg.ue
    spreads = spread_from_elevation(ue.r, ue.elevation, desk_cfg.ue_delta_theta)
    return build_correlation(desk_cfg.geometry, ue, spreads)


class TestSampleCovariance:
    def test_outer_product(self):
        e1 = np.zeros((4, 1), dtype=complex)
        e1[0] = 1
        cov = sample_covariance(e1)
        expected = np.zeros((4, 4))
        expected[0, 0] = 1
        np.testing.assert_array_equal(cov, expected)

    def test_trace_identity(self, rng):
        y = rng.standard_normal((8, 5)) + 1j * rng.standard_normal((8, 5))
        cov = sample_covariance(y)
        assert np.trace(cov).real == pytest.approx(np.sum(np.abs(y) ** 2) / 5)
        assert np.linalg.eigvalsh(cov).min() > -1e-12

    def test_law_of_large_numbers(self, desk_cfg, true_model):
        pm = desk_cfg.power
        s = generate_snapshots(true_model, pm, 10_000, 17)
        ref = pm.beta_linear * true_model.matrix + pm.noise_variance * np.eye(true_model.n)
        assert np.linalg.norm(sample_covariance(s) - ref) / np.linalg.norm(ref) < 0.05


class TestSplitSubspaces:
    def test_identity(self):
        split = split_subspaces(np.eye(6))
        assert split.detected_rank == 6
        assert split.noise_basis.shape == (6, 0)

    def test_rank_one_with_jitter(self, desk_geom, rng):
        a = steering_vector(desk_geom, SphericalPoint(0.3, 0.2, -0.1))
        j = 1e-9 * (rng.standard_normal((128, 128)) + 1j * rng.standard_normal((128, 128)))
        split = split_subspaces(np.outer(a, a.conj()) + j @ j.conj().T)
        assert split.detected_rank == 1
        assert np.abs(split.noise_basis.conj().T @ a).max() < 1e-6 * np.linalg.norm(a)

    def test_model_rank_recovered(self, desk_cfg, true_model):
        s = generate_snapshots(true_model, desk_cfg.power, 1000, 2, noise_var=0.0)
        assert split_subspaces(sample_covariance(s)).detected_rank == true_model.rank

    def test_unitary(self, desk_cfg, true_model):
        s = generate_snapshots(true_model, desk_cfg.power, 10, 3)
        split = split_subspaces(sample_covariance(s))
        full = np.hstack([split.signal_basis, split.noise_basis])
        np.testing.assert_allclose(full.conj().T @ full, np.eye(true_model.n), atol=1e-8)
        assert np.all(np.diff(split.eigenvalues) <= 1e-20)

    def test_thin_split_matches_full(self, desk_cfg, true_model):
        s = generate_snapshots(true_model, desk_cfg.power, 10, 4)
        full = split_subspaces(sample_covariance(s))
        thin = split_snapshots(s)
        assert thin.detected_rank == full.detected_rank
        np.testing.assert_allclose(thin.eigenvalues, full.eigenvalues, rtol=1e-8,
                                   atol=1e-10 * full.eigenvalues[0])
        pf = full.signal_basis @ full.signal_basis.conj().T
        pt = thin.signal_basis @ thin.signal_basis.conj().T
        np.testing.assert_allclose(pt, pf, atol=1e-8)

    def test_eig_failure_surfaces(self, monkeypatch):
        def boom(_):
            raise np.linalg.LinAlgError("did not converge")
        monkeypatch.setattr(np.linalg, "eigh", boom)
        with pytest.raises(EigFailure):
            split_subspaces(np.eye(3))


class TestSearchGrid:
    def test_axes(self):
        g = SearchGrid.from_degrees(0.5, 7.68, 0.5, -90, 90, 0.5, -90, 90, 0.5)
        assert g.shape == (15, 361, 361)
        assert g.axes[0][-1] == pytest.approx(7.5)

    def test_table1_default_contains_ue(self, table1_cfg):
        grid = table1_cfg.grid
        ue = table1_cfg.ue
        p = nearest_grid_point(grid, ue)
        assert p.as_degrees() == pytest.approx(ue.as_degrees(), abs=1e-9)
        assert grid.size == 15 * 361 * 361

    def test_point_and_coords_agree(self):
        g = SearchGrid.from_degrees(1, 3, 1, -10, 10, 5, -4, 4, 2)
        r, az, el = g.coords(0, g.size)
        for i in (0, 7, g.size - 1):
            p = g.point(i)
            assert (p.r, p.azimuth, p.elevation) == (r[i], az[i], el[i])

    @pytest.mark.parametrize("args", [(0, 1, 1, 0, 0, 1, 0, 0, 1), (1, 2, 0, 0, 0, 1, 0, 0, 1),
                                      (1, 2, 1, 0.5, 0, 1, 0, 0, 1)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            SearchGrid(*args)


class TestMusicSpectrum:
    def test_clamp_in_signal_span(self, desk_geom):
        p = SphericalPoint(0.3, 0.1, 0.1)
        split = split_snapshots(steering_vector(desk_geom, p))
        assert music_spectrum(split, desk_geom, p) == pytest.approx(1 / (1e-12 * desk_geom.n_elements))

    def test_empty_signal_basis(self, desk_geom):
        split = SubspaceSplit(np.zeros((128, 0), dtype=complex), np.zeros(128))
        assert music_spectrum(split, desk_geom, SphericalPoint(0.3, 0.4, -0.2)) == pytest.approx(1 / 128)

    def test_noise_projector_oracle(self, desk_cfg, true_model, rng):
        s = generate_snapshots(true_model, desk_cfg.power, 10, 5)
        split = split_subspaces(sample_covariance(s))
        qn = split.noise_basis
        for _ in range(100):
            p = SphericalPoint(rng.uniform(0.05, 0.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
            a = steering_vector(desk_cfg.geometry, p)
            direct = 1 / np.sum(np.abs(qn.conj().T @ a) ** 2)
            assert music_spectrum(split, desk_cfg.geometry, p) == pytest.approx(direct, rel=1e-8)

    def test_grid_values_match_pointwise(self, desk_geom, rng):
        y = rng.standard_normal((128, 3)) + 1j * rng.standard_normal((128, 3))
        split = split_snapshots(y)
        grid = SearchGrid.from_degrees(0.1, 0.3, 0.1, -10, 10, 5, -4, 4, 4)
        vals = spectrum_values(split, desk_geom, grid)
        for i in (0, 11, grid.size - 1):
            assert vals[i] == pytest.approx(music_spectrum(split, desk_geom, grid.point(i)), rel=1e-10)


class TestLocate:
    def test_noiseless_point_source(self, desk_cfg):
        grid = desk_cfg.grid
        target = nearest_grid_point(grid, desk_cfg.ue)
        split = split_snapshots(steering_batch(desk_cfg.geometry, [target]))
        assert locate(split, desk_cfg.geometry, grid) == target

    def test_single_point_grid(self, desk_geom, rng):
        grid = SearchGrid(0.2, 0.2, 0.1, 0.3, 0.3, 0.1, -0.1, -0.1, 0.1)
        split = split_snapshots(rng.standard_normal((128, 2)) + 0j)
        assert locate(split, desk_geom, grid) == grid.point(0)

    def test_ties_go_to_first_index(self, desk_geom):
        grid = SearchGrid.from_degrees(0.1, 0.3, 0.1, -10, 10, 5, -4, 4, 4)
        split = SubspaceSplit(np.zeros((128, 0), dtype=complex), np.zeros(128))
        assert locate(split, desk_geom, grid) == grid.point(0)

    def test_global_phase_invariance(self, desk_cfg, true_model):
        s = generate_snapshots(true_model, desk_cfg.power, 10, 8)
        a = locate(split_snapshots(s), desk_cfg.geometry, desk_cfg.grid)
        b = locate(split_snapshots(s.observations * np.exp(1j * 1.234)), desk_cfg.geometry,
                   desk_cfg.grid)
        assert a == b

    def test_batched_matches_single(self, desk_cfg, true_model):
        splits = [split_snapshots(generate_snapshots(true_model, desk_cfg.power, 10, s))
                  for s in range(6)]
        together = locate_many(splits, desk_cfg.geometry, desk_cfg.grid)
        assert together == [locate(s, desk_cfg.geometry, desk_cfg.grid) for s in splits]

    def test_coarse_to_fine_noiseless(self, desk_cfg):
        target = nearest_grid_point(desk_cfg.grid, desk_cfg.ue)
        split = split_snapshots(steering_batch(desk_cfg.geometry, [target]))
        assert locate(split, desk_cfg.geometry, desk_cfg.grid, coarse_factor=4) == target

    def test_success_nondecreasing_in_power(self, desk_cfg, true_model):
        target = nearest_grid_point(desk_cfg.grid, desk_cfg.ue)
        hits = []
        for p in (-14, -9, -4, 1):
            pm = PowerModel(transmit_power_dbm=p)
            splits = [split_snapshots(generate_snapshots(true_model, pm, 10, trial_seed(1, t, 0)))
                      for t in range(100)]
            found = locate_many(splits, desk_cfg.geometry, desk_cfg.grid)
            hits.append(sum(f == target for f in found))
        assert hits == sorted(hits), hits


class TestSpectrumDump:
    def test_csv(self, tmp_path, desk_geom, rng):
        grid = SearchGrid.from_degrees(0.1, 0.2, 0.1, -10, 10, 10, 0, 0, 1)
        split = split_snapshots(rng.standard_normal((128, 2)) + 0j)
        path = tmp_path / "spectrum.csv"
        write_spectrum_csv(path, split, desk_geom, grid)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["r", "phi_deg", "theta_deg", "metric"]
        assert len(rows) == grid.size + 1
        assert float(rows[1][1]) == pytest.approx(-10)
