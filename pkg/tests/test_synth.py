import numpy as np
import pytest

from wtree import (
    DimensionMismatchError,
    ValidationError,
    exact_wasserstein,
    gen_distributions,
    gen_gaussian_points,
    gen_pair_indices,
    gen_random_tree,
    gen_uniform_points,
    label_samples,
    perturb_matrix,
    tree_metric_distance,
    validate_semimetric,
)


class TestPointGenerators:
    def test_uniform_respects_bounds(self):
        pc = gen_uniform_points(50, 3, -2.0, 5.0, seed=0)
        assert pc.coords.shape == (50, 3)
        assert pc.coords.min() >= -2.0
        assert pc.coords.max() <= 5.0

    def test_uniform_deterministic(self):
        a = gen_uniform_points(10, 2, 0.0, 1.0, seed=4)
        b = gen_uniform_points(10, 2, 0.0, 1.0, seed=4)
        assert np.array_equal(a.coords, b.coords)

    def test_uniform_rejects_bad_range(self):
        with pytest.raises(ValidationError):
            gen_uniform_points(10, 2, 1.0, 0.0, seed=0)

    def test_gaussian_shape_and_determinism(self):
        a = gen_gaussian_points(20, 4, seed=5)
        b = gen_gaussian_points(20, 4, seed=5)
        assert a.coords.shape == (20, 4)
        assert np.array_equal(a.coords, b.coords)


class TestDistributions:
    def test_support_size(self):
        for sparsity, expect in ((1.0, 10), (0.5, 5), (0.11, 2)):
            dists = gen_distributions(10, 5, sparsity, seed=1)
            for d in dists:
                assert np.count_nonzero(d.p) == expect
                assert d.p.sum() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_zero_support(self):
        with pytest.raises(ValidationError):
            gen_distributions(10, 5, 0.0, seed=0)


class TestRandomTree:
    def test_leaf_matrix_is_tree_metric(self):
        # four-point condition: the two largest of the three pairings of
        # d(ab)+d(cd) style sums coincide
        for seed in range(10):
            _, d = gen_random_tree(15, seed=seed)
            m = d.d
            n = m.shape[0]
            rng = np.random.Generator(np.random.Philox(seed))
            for _ in range(30):
                a, b, c, e = rng.choice(n, size=4, replace=False)
                sums = sorted([m[a, b] + m[c, e], m[a, c] + m[b, e],
                               m[a, e] + m[b, c]])
                assert sums[1] == pytest.approx(sums[2], abs=1e-9)

    def test_unit_weight_distances_are_integers(self):
        _, d = gen_random_tree(25, seed=3)
        assert np.allclose(d.d, np.round(d.d))

    def test_structure(self):
        tree, d = gen_random_tree(30, seed=7)
        assert tree.parent[0] == -1
        assert np.all(tree.parent[1:] >= 0)
        assert d.n == len(tree.leaves)

    def test_rejects_tiny(self):
        with pytest.raises(ValidationError):
            gen_random_tree(2, seed=0)


class TestPerturbMatrix:
    def test_sigma_zero_is_identity(self):
        _, d = gen_random_tree(20, seed=9)
        out = perturb_matrix(d, 0.0, seed=10)
        assert np.array_equal(out.d, d.d)

    def test_output_is_valid_semimetric(self):
        _, d = gen_random_tree(20, seed=11)
        out = perturb_matrix(d, 2.0, seed=12)
        validate_semimetric(out.d)
        assert np.allclose(out.d, out.d.T)
        assert np.all(np.diagonal(out.d) == 0)
        assert np.all(out.d >= 0)

    def test_noise_scale(self):
        # variance of the added noise is 2 sigma^2 per element
        base = validate_semimetric(1e6 * (np.ones((40, 40)) - np.eye(40)))
        out = perturb_matrix(base, 3.0, seed=13)
        iu = np.triu_indices(40, k=1)
        sample_std = (out.d - base.d)[iu].std()
        assert sample_std == pytest.approx(np.sqrt(2) * 3.0, rel=0.15)

    def test_rejects_negative_sigma(self):
        _, d = gen_random_tree(10, seed=14)
        with pytest.raises(ValidationError):
            perturb_matrix(d, -1.0, seed=0)


class TestMetricsAndLabels:
    def test_tree_metric_distance_zero_on_equal(self):
        _, d = gen_random_tree(20, seed=15)
        assert tree_metric_distance(d.d, d.d) == 0.0

    def test_tree_metric_distance_known_value(self):
        a = np.zeros((3, 3))
        b = np.ones((3, 3)) - np.eye(3)
        # Frobenius norm sqrt(6), scaled by 2 / (3 * 2)
        assert tree_metric_distance(a, b) == pytest.approx(np.sqrt(6) / 3)

    def test_tree_metric_distance_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            tree_metric_distance(np.zeros((3, 3)), np.zeros((4, 4)))

    def test_pair_indices_distinct_and_in_range(self):
        pairs = gen_pair_indices(200, 10, seed=16)
        assert len(pairs) == 200
        for i, j in pairs:
            assert 0 <= i < 10 and 0 <= j < 10
            assert i != j

    def test_label_samples_uses_solver(self):
        _, d = gen_random_tree(12, seed=17)
        dists = gen_distributions(d.n, 5, 1.0, seed=18)
        pairs = gen_pair_indices(6, 5, seed=19)
        samples = label_samples(d, dists, pairs, exact_wasserstein)
        for (i, j), s in zip(pairs, samples):
            assert (s.mu, s.rho) == (i, j)
            assert s.w1 == pytest.approx(
                exact_wasserstein(d, dists[i], dists[j]).cost, abs=1e-12)
