import numpy as np
import pytest

from spatialsbm.metrics import morans_i
from spatialsbm.similarity import FISHER_BOUND, build_neighborhood, check_similarity_matrix
from spatialsbm.synthetic import (
    SyntheticSpec,
    band_labels,
    generate_nonspatial_null,
    generate_spatial_sbm,
    lattice_coordinates,
)


class TestGenerateSpatialSbm:
    def test_single_block_mean(self):
        spec = SyntheticSpec(grid_side=12, k_true=1, mu_within=0.5,
                             mu_between=0.0, precision=4.0, seed=0)
        sims, _, truth = generate_spatial_sbm(spec)
        assert np.all(truth == 1)
        A = sims[0]
        iu = np.triu_indices(spec.n_cells, k=1)
        vals = A[iu]
        sd = 1 / np.sqrt(spec.precision)
        assert abs(vals.mean() - 0.5) < 3 * sd / np.sqrt(vals.size)

    def test_band_occupancies(self):
        spec = SyntheticSpec(grid_side=12, k_true=3, seed=1)
        _, coords, truth = generate_spatial_sbm(spec)
        assert np.bincount(truth)[1:].tolist() == [48, 48, 48]
        # bands follow the x coordinate
        for c in (1, 2, 3):
            xs = coords[truth == c, 0]
            assert xs.max() - xs.min() == 3

    def test_deterministic(self):
        spec = SyntheticSpec(grid_side=8, k_true=2, seed=9)
        a = generate_spatial_sbm(spec)
        b = generate_spatial_sbm(spec)
        assert np.array_equal(a[0][0], b[0][0])
        assert np.array_equal(a[1], b[1])
        assert np.array_equal(a[2], b[2])

    def test_similarity_invariants(self):
        spec = SyntheticSpec(grid_side=6, k_true=2, seed=3, n_modalities=2)
        sims, _, _ = generate_spatial_sbm(spec)
        assert len(sims) == 2
        for A in sims:
            check_similarity_matrix(A)
            assert np.all(np.diag(A) == FISHER_BOUND)

    def test_block_moments_converge(self):
        spec = SyntheticSpec(grid_side=16, k_true=2, mu_within=0.8,
                             mu_between=0.1, precision=4.0, seed=4)
        sims, _, truth = generate_spatial_sbm(spec)
        A = sims[0]
        same = truth[:, None] == truth[None, :]
        iu = np.triu_indices(spec.n_cells, k=1)
        within = A[iu][same[iu]]
        between = A[iu][~same[iu]]
        for vals, mu in ((within, 0.8), (between, 0.1)):
            se = vals.std() / np.sqrt(vals.size)
            assert abs(vals.mean() - mu) < 4 * se
            assert abs(vals.var() - 0.25) < 0.02

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SyntheticSpec(grid_side=12, k_true=3, mu_within=0.0, mu_between=0.5)
        with pytest.raises(ValueError):
            SyntheticSpec(grid_side=12, k_true=13)
        with pytest.raises(ValueError):
            SyntheticSpec(precision=0.0)


class TestGenerateNonspatialNull:
    def test_similarities_and_truth_unchanged(self):
        spec = SyntheticSpec(grid_side=10, k_true=3, seed=7)
        spatial = generate_spatial_sbm(spec)
        null = generate_nonspatial_null(spec)
        assert np.array_equal(spatial[0][0], null[0][0])
        assert np.array_equal(spatial[2], null[2])

    def test_coordinates_permuted(self):
        spec = SyntheticSpec(grid_side=10, k_true=3, seed=7)
        spatial = generate_spatial_sbm(spec)
        null = generate_nonspatial_null(spec)
        assert not np.array_equal(spatial[1], null[1])
        assert np.array_equal(
            np.sort(spatial[1].view("f8,f8"), axis=0),
            np.sort(null[1].view("f8,f8"), axis=0),
        )

    def test_truth_loses_spatial_signal(self):
        spec = SyntheticSpec(grid_side=12, k_true=3, seed=5)
        _, coords, truth = generate_nonspatial_null(spec)
        graph = build_neighborhood(coords, 1.0)
        assert abs(morans_i(truth, graph)) < 0.1


class TestLatticeHelpers:
    def test_lattice_coordinates_unit_spacing(self):
        coords = lattice_coordinates(3)
        assert coords.shape == (9, 2)
        assert coords[1].tolist() == [1.0, 0.0]
        assert coords[3].tolist() == [0.0, 1.0]

    def test_band_labels_contiguous(self):
        labels = band_labels(12, 3)
        assert labels.min() == 1 and labels.max() == 3
        labels45 = band_labels(10, 4)  # non-divisible split stays monotone
        cols = np.arange(100) % 10
        order = np.argsort(cols, kind="stable")
        assert np.all(np.diff(labels45[order]) >= 0)
