"""Per-domain matrix factorization by SGD, plus simple feature baselines.

The predictor is mu + u_i . v_j (global-mean offset, no bias terms).
Users and items without training ratings keep zero factor rows, so the
model falls back to the global mean for them; the cross-domain pipeline
later overwrites cold users' rows with transferred factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


class MfError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.005
    lr_decay: float = 0.95
    lam: float = 0.05
    epochs: int = 30
    init_sigma: float = 0.1
    seed: int = 0
    clamp: tuple | None = (1.0, 5.0)

    def __post_init__(self):
        if self.learning_rate <= 0 or self.init_sigma <= 0 or self.epochs < 1:
            raise MfError("learning_rate, init_sigma, epochs must be positive")
        if not 0 < self.lr_decay <= 1:
            raise MfError("lr_decay must be in (0, 1]")
        if self.lam < 0:
            raise MfError("lambda must be non-negative")


@dataclass
class FactorModel:
    U: np.ndarray
    V: np.ndarray
    mu: float
    k: int
    lam: float
    domain: str = ""
    config: TrainConfig | None = None

    def save(self, path):
        np.savez(path, U=self.U, V=self.V, mu=self.mu, k=self.k,
                 lam=self.lam, domain=self.domain,
                 config=np.array(repr(self.config)))

    @classmethod
    def load(cls, path):
        data = np.load(path, allow_pickle=False)
        cfg = eval(str(data["config"]), {"TrainConfig": TrainConfig})  # noqa: S307 - own dump format
        return cls(U=data["U"], V=data["V"], mu=float(data["mu"]),
                   k=int(data["k"]), lam=float(data["lam"]),
                   domain=str(data["domain"]), config=cfg)


@njit(cache=True)
def _sgd_epoch(users, items, ratings, mu, U, V, lr, lam):
    for j in range(users.shape[0]):
        u = users[j]
        i = items[j]
        err = ratings[j] - mu
        for t in range(U.shape[1]):
            err -= U[u, t] * V[i, t]
        for t in range(U.shape[1]):
            du = err * V[i, t] - lam * U[u, t]
            dv = err * U[u, t] - lam * V[i, t]
            U[u, t] += lr * du
            V[i, t] += lr * dv


def objective(users, items, ratings, mu, U, V, lam):
    """Regularized squared error the SGD minimizes."""
    pred = mu + np.sum(U[users] * V[items], axis=1)
    reg = lam * (np.sum(U[users] ** 2, axis=1) + np.sum(V[items] ** 2, axis=1))
    return float(np.sum((ratings - pred) ** 2 + reg))


def fit_mf(matrix, config, k, warm_start=None, track_objective=False):
    """SGD matrix factorization of one domain's training ratings.

    ``matrix`` is anything exposing ``users``/``items``/``ratings``
    index arrays plus ``n_users``/``n_items`` (see data.RatingsMatrix).
    Rows of users/items absent from training stay zero. Deterministic
    for a fixed (matrix, config, k).
    """
    users = np.ascontiguousarray(matrix.users, dtype=np.int64)
    items = np.ascontiguousarray(matrix.items, dtype=np.int64)
    ratings = np.ascontiguousarray(matrix.ratings, dtype=np.float64)
    if users.size == 0:
        raise MfError("cannot fit MF on an empty ratings matrix")
    rng = np.random.default_rng(config.seed)
    mu = float(ratings.mean())
    if warm_start is not None:
        U = warm_start.U.copy()
        V = warm_start.V.copy()
    else:
        U = np.zeros((matrix.n_users, k))
        V = np.zeros((matrix.n_items, k))
        seen_u = np.unique(users)
        seen_i = np.unique(items)
        U[seen_u] = rng.standard_normal((seen_u.size, k)) * config.init_sigma
        V[seen_i] = rng.standard_normal((seen_i.size, k)) * config.init_sigma

    lr = config.learning_rate
    order = np.arange(users.size)
    trace = []
    for epoch in range(config.epochs):
        rng.shuffle(order)
        _sgd_epoch(users[order], items[order], ratings[order],
                   mu, U, V, lr, config.lam)
        if track_objective:
            trace.append(objective(users, items, ratings, mu, U, V, config.lam))
        if not np.isfinite(U).all() or not np.isfinite(V).all():
            raise MfError(
                f"SGD diverged at epoch {epoch}; try a smaller learning_rate")
        lr *= config.lr_decay
    model = FactorModel(U=U, V=V, mu=mu, k=k, lam=config.lam,
                        domain=matrix.domain, config=config)
    if track_objective:
        return model, trace
    return model


def predict(model, i, j):
    """mu + u_i . v_j, clamped to the configured rating bounds."""
    if not (0 <= i < model.U.shape[0]) or not (0 <= j < model.V.shape[0]):
        raise MfError(f"index ({i}, {j}) out of range")
    score = model.mu + float(model.U[i] @ model.V[j])
    clamp = model.config.clamp if model.config else None
    if clamp is not None:
        score = min(max(score, clamp[0]), clamp[1])
    return score


def predict_batch(model, users, items, clamp="config"):
    scores = model.mu + np.sum(model.U[users] * model.V[items], axis=1)
    bounds = model.config.clamp if (clamp == "config" and model.config) else (
        clamp if clamp != "config" else None)
    if bounds is not None:
        scores = np.clip(scores, bounds[0], bounds[1])
    return scores


class OffsetModel:
    """Constant predictor: the training-ratings mean."""

    def __init__(self, mu):
        self.mu = float(mu)

    def predict(self, i=None, j=None):
        return self.mu


def offset_baseline(matrix):
    if matrix.ratings.size == 0:
        raise MfError("cannot compute the offset of an empty ratings matrix")
    return OffsetModel(matrix.ratings.mean())


def pca_user_features(matrix, k):
    """User scores on the top-k principal components of the rating matrix.

    Missing ratings are imputed as zero before mean-centering the dense
    user-item matrix; components are ordered by descending explained
    variance.
    """
    dense = np.zeros((matrix.n_users, matrix.n_items))
    dense[matrix.users, matrix.items] = matrix.ratings
    if k > min(dense.shape):
        raise MfError(f"k={k} exceeds min(n_users, n_items)")
    centered = dense - dense.mean(axis=0)
    U, S, Vt = np.linalg.svd(centered, full_matrices=False)
    # deterministic sign: largest-magnitude loading positive
    for j in range(k):
        lead = np.argmax(np.abs(Vt[j]))
        if Vt[j, lead] < 0:
            Vt[j] = -Vt[j]
            U[:, j] = -U[:, j]
    return U[:, :k] * S[:k]
