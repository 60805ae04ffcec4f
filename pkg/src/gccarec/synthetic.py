"""Surrogate multi-domain rating data with a planted shared structure.

Users carry a per-user bias and low-rank taste factors that are partly
shared across domains; domain membership is heterogeneous (some users
rate in every domain, some only in the target, some only in the
auxiliaries). This gives cross-domain transfer something real to find
while keeping single-domain information away from cold users.

Also provides writers that emit the generated data in the MovieLens-1M
and Amazon review file layouts, so ingestion can be exercised without
the real datasets.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .data import from_triples


@dataclass
class SurrogateConfig:
    domains: tuple = ("music", "movies")   # first entry is the target
    n_users: int = 700
    n_items: int = 350
    k: int = 8
    ratings_per_user: tuple = (20, 60)
    noise: float = 0.35
    factor_scale: float = 0.4
    bias_scale: float = 0.9
    factor_share: float = 0.7     # correlation of user factors across domains
    bias_share: float = 1.0       # correlation of user bias across domains
    p_all: float = 0.85           # user rates in every domain
    p_target_only: float = 0.05
    domain_means: tuple = (3.6, 3.4, 3.5, 3.3, 3.7, 3.2)
    seed: int = 0

    def __post_init__(self):
        if len(self.domains) < 2:
            raise ValueError("need at least 2 domains")
        if not 0 <= self.p_all + self.p_target_only <= 1:
            raise ValueError("membership probabilities must sum to <= 1")
        if not 0 <= self.factor_share <= 1 or not 0 <= self.bias_share <= 1:
            raise ValueError("share fractions must be in [0, 1]")


def make_rating_domains(cfg):
    """One RatingsMatrix per domain over a shared external user id space.

    Returns (matrices, groups) where groups maps user id to its
    membership label: "all", "target_only", or "aux_only".
    """
    rng = np.random.default_rng(cfg.seed)
    L, k = cfg.n_users, cfg.k
    shared_factors = rng.standard_normal((L, k))
    shared_bias = rng.standard_normal(L)
    p_aux = 1.0 - cfg.p_all - cfg.p_target_only
    grp = rng.choice(3, L, p=[cfg.p_all, cfg.p_target_only, p_aux])
    labels = np.array(["all", "target_only", "aux_only"])[grp]
    user_ids = [f"u{u:05d}" for u in range(L)]
    matrices = {}
    for d, name in enumerate(cfg.domains):
        in_domain = (grp == 0) | (grp == (1 if d == 0 else 2))
        rho, brho = cfg.factor_share, cfg.bias_share
        P = (rho * shared_factors
             + np.sqrt(1 - rho ** 2) * rng.standard_normal((L, k)))
        P *= cfg.factor_scale
        b = (brho * shared_bias
             + np.sqrt(1 - brho ** 2) * rng.standard_normal(L))
        b *= cfg.bias_scale
        Q = rng.standard_normal((cfg.n_items, k)) * cfg.factor_scale
        item_bias = rng.standard_normal(cfg.n_items) * 0.3
        mu = cfg.domain_means[d % len(cfg.domain_means)]
        triples = []
        ts = 0
        for u in range(L):
            if not in_domain[u]:
                continue
            m = int(rng.integers(*cfg.ratings_per_user))
            items = rng.choice(cfg.n_items, m, replace=False)
            raw = (mu + b[u] + item_bias[items] + P[u] @ Q[items].T
                   + rng.standard_normal(m) * cfg.noise)
            scores = np.clip(np.rint(raw * 2) / 2, 1.0, 5.0)
            for j, r in zip(items, scores):
                ts += 1
                triples.append((user_ids[u], f"{name}_i{j:04d}", float(r), ts))
        matrices[name] = from_triples(name, triples)
    groups = dict(zip(user_ids, labels))
    return matrices, groups


def write_movielens(matrices, ratings_path, movies_path):
    """Emit the domains as genre-tagged MovieLens-1M layout files.

    Each domain becomes a genre; each item becomes a movie tagged with
    that single genre. Round-trips through ingest_movielens.
    """
    movie_id = {}
    with open(movies_path, "w", encoding="latin-1") as fh:
        next_id = 1
        for name, m in matrices.items():
            for item in m.item_ids:
                movie_id[(name, item)] = next_id
                fh.write(f"{next_id}::Title {next_id} (2000)::{name}\n")
                next_id += 1
    with open(ratings_path, "w", encoding="latin-1") as fh:
        ts = 978300000
        for name, m in matrices.items():
            for u, i, r in zip(m.users, m.items, m.ratings):
                ts += 1
                mid = movie_id[(name, m.item_ids[i])]
                fh.write(f"{m.user_ids[u]}::{mid}::{r:g}::{ts}\n")


_REVIEW_VOCAB = (
    ("melody", "rhythm", "vocals", "album", "chorus", "guitar"),
    ("plot", "acting", "scene", "director", "camera", "script"),
)


def make_reviews(matrix, groups, seed=0, words_per_review=12):
    """Per-user review texts with group-dependent vocabulary.

    Users labelled "all" draw words from the first vocabulary, the rest
    from the second, giving a topic model something separable to find.
    """
    rng = np.random.default_rng(seed)
    reviews = {}
    for uid in matrix.user_ids:
        vocab = _REVIEW_VOCAB[0 if groups.get(uid) == "all" else 1]
        words = rng.choice(vocab, size=words_per_review)
        reviews[uid] = [" ".join(words)]
    return reviews


def write_amazon(matrices, out_dir, reviews=None):
    """Emit the domains as line-delimited Amazon review files.

    Returns the map from category to file path expected by
    ingest_amazon.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for name, m in matrices.items():
        path = os.path.join(out_dir, f"reviews_{name}.json")
        texts = (reviews or {}).get(name, {})
        used = {}
        with open(path, "w", encoding="utf-8") as fh:
            ts = 1300000000
            for u, i, r in zip(m.users, m.items, m.ratings):
                ts += 1
                uid = m.user_ids[u]
                rec = {"reviewerID": uid, "asin": m.item_ids[i],
                       "overall": float(r), "unixReviewTime": ts}
                pool = texts.get(uid)
                if pool:
                    rec["reviewText"] = pool[used.get(uid, 0) % len(pool)]
                    used[uid] = used.get(uid, 0) + 1
                fh.write(json.dumps(rec) + "\n")
        paths[name] = path
    return paths
