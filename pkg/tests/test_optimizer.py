import numpy as np
import pytest

from wtree import (
    TrainConfig,
    ValidationError,
    exact_wasserstein,
    gd_step,
    gen_distributions,
    gen_pair_indices,
    gradient,
    label_samples,
    lca_classes,
    load_checkpoint,
    loss,
    make_state,
    node_gradient,
    project_to_ultrametric,
    save_checkpoint,
    train,
    train_skip_mst,
    validate_semimetric,
)


def rand_semimetric(n, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    d = rng.uniform(0.5, 10.0, (n, n))
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return validate_semimetric(d)


def make_problem(n, seed, n_dists=10, n_pairs=15):
    d = rand_semimetric(n, seed)
    dists = gen_distributions(n, n_dists, 1.0, seed=seed + 1)
    pairs = gen_pair_indices(n_pairs, n_dists, seed=seed + 2)
    samples = label_samples(d, dists, pairs, exact_wasserstein)
    return d, dists, samples


class TestConfig:
    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ValidationError):
            TrainConfig(alpha=0.0)

    def test_rejects_zero_iters(self):
        with pytest.raises(ValidationError):
            TrainConfig(max_iters=0)


class TestGradient:
    def test_matches_finite_differences(self):
        # central differences of the fixed-coupling loss in height space
        rng = np.random.Generator(np.random.Philox(0))
        for trial in range(10):
            n = int(rng.integers(4, 13))
            d, dists, samples = make_problem(n, 50 + 7 * trial)
            state = make_state(d, dists, samples)
            analytic = node_gradient(state, samples)
            cls = state.class_matrix
            w_true = np.array([s.w1 for s in samples])

            def loss_at(h):
                mat = h[cls].copy()
                np.fill_diagonal(mat, 0.0)
                w = np.array([m @ mat[ii, jj] for ii, jj, m in state.couplings])
                return float((w - w_true) @ (w - w_true))

            eps = 1e-6
            for v in range(state.tree.n_nodes):
                hp = state.tree.height.copy()
                hm = state.tree.height.copy()
                hp[v] += eps
                hm[v] -= eps
                fd = (loss_at(hp) - loss_at(hm)) / (2 * eps)
                scale = max(abs(fd), abs(analytic[v]), 1e-8)
                assert abs(analytic[v] - fd) / scale < 1e-5

    def test_zero_at_perfect_fit(self):
        d, dists, _ = make_problem(6, 100)
        _, u = project_to_ultrametric(d)
        dists = gen_distributions(6, 8, 1.0, seed=101)
        pairs = gen_pair_indices(10, 8, seed=102)
        samples = label_samples(u, dists, pairs, exact_wasserstein)
        state = make_state(validate_semimetric(u.d), dists, samples)
        assert loss(state, samples) == pytest.approx(0.0, abs=1e-18)
        assert np.allclose(gradient(state, samples), 0.0, atol=1e-12)
        assert np.allclose(node_gradient(state, samples), 0.0, atol=1e-12)

    def test_gradient_matrix_is_symmetric_zero_diagonal(self):
        d, dists, samples = make_problem(7, 200)
        state = make_state(d, dists, samples)
        g = gradient(state, samples)
        assert np.allclose(g, g.T)
        assert np.all(np.diagonal(g) == 0.0)


class TestGdStep:
    def test_clamps_and_symmetrizes(self):
        d = rand_semimetric(4, 300).d
        g = np.full((4, 4), 1e9)
        out = gd_step(d, g, 1.0)
        assert np.all(out >= 0)
        assert np.allclose(out, out.T)
        assert np.all(np.diagonal(out) == 0)


class TestTraining:
    def test_loss_decreases(self):
        d, dists, samples = make_problem(10, 400, n_dists=12, n_pairs=30)
        tree, matrix, history = train(d, dists, samples,
                                      TrainConfig(alpha=0.05, max_iters=100))
        assert history[-1] < history[0]

    def test_fixed_point_when_init_is_truth(self):
        # labels generated from the init's own projection: nothing to learn
        d = rand_semimetric(6, 500)
        _, u = project_to_ultrametric(d)
        dists = gen_distributions(6, 8, 1.0, seed=501)
        pairs = gen_pair_indices(12, 8, seed=502)
        samples = label_samples(u, dists, pairs, exact_wasserstein)
        tree, matrix, history = train(validate_semimetric(u.d), dists, samples,
                                      TrainConfig(alpha=0.05, max_iters=50))
        assert history[-1] == pytest.approx(0.0, abs=1e-18)
        assert np.allclose(matrix.d, u.d, atol=1e-12)

    def test_deterministic_given_seed(self):
        d, dists, samples = make_problem(8, 600, n_dists=10, n_pairs=20)
        cfg = TrainConfig(alpha=0.05, max_iters=40, batch_size=8, seed=3)
        _, m1, h1 = train(d, dists, samples, cfg)
        _, m2, h2 = train(d, dists, samples, cfg)
        assert np.array_equal(m1.d, m2.d)
        assert h1 == h2

    def test_skip_mst_freezes_topology(self):
        d, dists, samples = make_problem(8, 700, n_dists=10, n_pairs=20)
        init_tree, _ = project_to_ultrametric(d)
        init_cls = lca_classes(init_tree).class_matrix

        # labels from a different metric force real updates
        other = rand_semimetric(8, 701)
        dists2 = gen_distributions(8, 10, 1.0, seed=702)
        pairs = gen_pair_indices(20, 10, seed=703)
        samples2 = label_samples(other, dists2, pairs, exact_wasserstein)

        state = make_state(d, dists2, samples2)
        tree, matrix, history = train_skip_mst(
            d, dists2, samples2, TrainConfig(alpha=0.02, max_iters=30))
        # couplings were never recomputed, so residuals always refer to the
        # initial class structure; the final tree comes from one projection
        assert history[-1] < history[0]
        assert np.array_equal(state.class_matrix, init_cls)

    def test_empty_samples_rejected(self):
        d, dists, _ = make_problem(5, 800)
        with pytest.raises(ValidationError):
            train(d, dists, [], TrainConfig())


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        d, dists, samples = make_problem(6, 900)
        cfg = TrainConfig(alpha=0.05, max_iters=20)
        tree, matrix, history = train(d, dists, samples, cfg)
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, tree, matrix, history, cfg)
        tree2, matrix2, history2, cfg2 = load_checkpoint(path)
        assert np.array_equal(tree2.parent, tree.parent)
        assert np.array_equal(tree2.height, tree.height)
        assert np.array_equal(matrix2.d, matrix.d)
        assert history2 == history
        assert cfg2 == cfg
