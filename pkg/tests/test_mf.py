import numpy as np
import pytest

from gccarec.data import RatingsMatrix
from gccarec.mf import (MfError, TrainConfig, fit_mf, objective,
                        offset_baseline, pca_user_features, predict)


def matrix_from_dense(dense, domain="d"):
    users, items = np.nonzero(~np.isnan(dense))
    return RatingsMatrix(domain=domain, users=users, items=items,
                         ratings=dense[users, items],
                         user_ids=[f"u{i}" for i in range(dense.shape[0])],
                         item_ids=[f"i{j}" for j in range(dense.shape[1])])


def planted_rank_one(n_users=20, n_items=15, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(n_users)
    v = rng.standard_normal(n_items)
    return matrix_from_dense(3.0 + np.outer(u, v))


class TestFit:
    def test_constant_ratings(self):
        dense = np.full((6, 5), 3.0)
        model = fit_mf(matrix_from_dense(dense),
                       TrainConfig(learning_rate=0.05, lr_decay=1.0,
                                   lam=0.5, epochs=200), k=2)
        assert model.mu == 3.0
        assert np.linalg.norm(model.U) < 0.05
        assert abs(predict(model, 0, 0) - 3.0) < 0.01

    def test_planted_rank_one_recovered(self):
        matrix = planted_rank_one()
        cfg = TrainConfig(learning_rate=0.05, lr_decay=1.0, lam=1e-4,
                          epochs=500, seed=1)
        model = fit_mf(matrix, cfg, k=2)
        pred = model.mu + np.sum(model.U[matrix.users] * model.V[matrix.items],
                                 axis=1)
        assert np.mean((matrix.ratings - pred) ** 2) < 1e-3

    def test_objective_descends(self):
        matrix = planted_rank_one()
        cfg = TrainConfig(learning_rate=1e-3, lam=1e-4, epochs=50, seed=2)
        _, trace = fit_mf(matrix, cfg, k=2, track_objective=True)
        tail = trace[len(trace) // 5:]
        assert all(b <= a + 1e-9 for a, b in zip(tail, tail[1:]))
        assert trace[-1] < trace[0]

    def test_regularization_monotonicity(self):
        matrix = planted_rank_one()
        norms = []
        for lam in (1e-4, 1e-2, 1.0):
            model = fit_mf(matrix, TrainConfig(lam=lam, epochs=100, seed=3),
                           k=2)
            norms.append(np.linalg.norm(model.U) + np.linalg.norm(model.V))
        assert norms[0] >= norms[1] >= norms[2]

    def test_seed_determinism(self):
        matrix = planted_rank_one()
        cfg = TrainConfig(epochs=10, seed=4)
        a = fit_mf(matrix, cfg, k=3)
        b = fit_mf(matrix, cfg, k=3)
        assert np.array_equal(a.U, b.U) and np.array_equal(a.V, b.V)

    def test_unseen_rows_stay_zero(self):
        dense = np.full((5, 4), np.nan)
        dense[:3, :] = 3.5
        model = fit_mf(matrix_from_dense(dense), TrainConfig(epochs=5), k=2)
        assert np.all(model.U[3:] == 0)

    def test_divergence_reported_with_epoch(self):
        matrix = planted_rank_one()
        cfg = TrainConfig(learning_rate=50.0, epochs=30, seed=5)
        with pytest.raises(MfError, match="epoch"):
            fit_mf(matrix, cfg, k=2)

    def test_empty_matrix_rejected(self):
        empty = RatingsMatrix(domain="d", users=np.array([], dtype=np.int64),
                              items=np.array([], dtype=np.int64),
                              ratings=np.array([]), user_ids=["u0"],
                              item_ids=["i0"])
        with pytest.raises(MfError):
            fit_mf(empty, TrainConfig(), k=2)

    def test_objective_matches_definition(self):
        matrix = planted_rank_one()
        model = fit_mf(matrix, TrainConfig(epochs=5, seed=6), k=2)
        direct = 0.0
        for u, i, r in zip(matrix.users, matrix.items, matrix.ratings):
            err = r - model.mu - model.U[u] @ model.V[i]
            direct += err ** 2 + model.lam * (model.U[u] @ model.U[u]
                                              + model.V[i] @ model.V[i])
        computed = objective(matrix.users, matrix.items, matrix.ratings,
                             model.mu, model.U, model.V, model.lam)
        assert abs(direct - computed) < 1e-9 * max(abs(direct), 1.0)


class TestPredict:
    def test_zero_factors_give_mu(self):
        dense = np.full((3, 3), 4.0)
        model = fit_mf(matrix_from_dense(dense), TrainConfig(epochs=1), k=2)
        model.U[:] = 0
        model.V[:] = 0
        assert predict(model, 0, 0) == model.mu

    def test_inner_product_arithmetic(self):
        model = fit_mf(planted_rank_one(), TrainConfig(epochs=1, clamp=None),
                       k=2)
        model.mu = 3.0
        model.U[0] = [1.0, 0.0]
        model.V[0] = [2.0, 0.0]
        assert predict(model, 0, 0) == 5.0

    def test_clamp(self):
        model = fit_mf(planted_rank_one(), TrainConfig(epochs=1), k=2)
        model.mu = 3.0
        model.U[0] = [1.0, 0.0]
        model.V[0] = [3.2, 0.0]
        assert predict(model, 0, 0) == 5.0

    def test_out_of_range_rejected(self):
        model = fit_mf(planted_rank_one(), TrainConfig(epochs=1), k=2)
        with pytest.raises(MfError):
            predict(model, 99, 0)


class TestOffset:
    def test_mean_of_two(self):
        dense = np.full((1, 2), np.nan)
        dense[0] = [2.0, 4.0]
        assert offset_baseline(matrix_from_dense(dense)).predict() == 3.0

    def test_single_rating(self):
        dense = np.full((1, 1), 5.0)
        assert offset_baseline(matrix_from_dense(dense)).predict() == 5.0

    def test_train_mse_is_variance(self):
        matrix = planted_rank_one()
        mu = offset_baseline(matrix).predict()
        mse = np.mean((matrix.ratings - mu) ** 2)
        assert abs(mse - np.var(matrix.ratings)) < 1e-12

    def test_empty_rejected(self):
        empty = RatingsMatrix(domain="d", users=np.array([], dtype=np.int64),
                              items=np.array([], dtype=np.int64),
                              ratings=np.array([]), user_ids=[], item_ids=[])
        with pytest.raises(MfError):
            offset_baseline(empty)


class TestPca:
    def test_rank_one_exact(self):
        rng = np.random.default_rng(7)
        dense = np.outer(rng.standard_normal(12), rng.standard_normal(9))
        matrix = matrix_from_dense(dense)
        scores = pca_user_features(matrix, 1)
        centered = dense - dense.mean(axis=0)
        _, _, Vt = np.linalg.svd(centered, full_matrices=False)
        recon = scores @ Vt[:1] * np.sign(Vt[0, np.argmax(np.abs(Vt[0]))])
        assert np.abs(recon - centered).max() < 1e-10

    def test_scores_orthogonal(self):
        rng = np.random.default_rng(8)
        matrix = matrix_from_dense(rng.standard_normal((30, 20)))
        scores = pca_user_features(matrix, 5)
        gram = scores.T @ scores
        off = gram - np.diag(np.diag(gram))
        assert np.abs(off).max() < 1e-8

    def test_explained_variance_matches_eigendecomposition(self):
        rng = np.random.default_rng(9)
        dense = rng.standard_normal((50, 30))
        matrix = matrix_from_dense(dense)
        scores = pca_user_features(matrix, 6)
        centered = dense - dense.mean(axis=0)
        eigvals = np.sort(np.linalg.eigvalsh(centered.T @ centered))[::-1]
        assert np.abs(np.sum(scores ** 2, axis=0) - eigvals[:6]).max() < 1e-8

    def test_k_too_large_rejected(self):
        matrix = matrix_from_dense(np.ones((4, 3)))
        with pytest.raises(MfError):
            pca_user_features(matrix, 5)


def test_save_load_round_trip(tmp_path):
    model = fit_mf(planted_rank_one(), TrainConfig(epochs=5, seed=10), k=3)
    path = tmp_path / "model.npz"
    model.save(path)
    from gccarec.mf import FactorModel

    loaded = FactorModel.load(path)
    assert np.array_equal(loaded.U, model.U)
    assert np.array_equal(loaded.V, model.V)
    assert loaded.mu == model.mu and loaded.k == model.k
    assert loaded.config == model.config
