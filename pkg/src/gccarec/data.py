"""Dataset ingestion, user alignment, and cold-start splitting.

Ratings for each domain live in a RatingsMatrix with domain-local user
and item indices plus the external ids behind them. Only users are
aligned across domains; items stay per-domain.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np


class DataError(ValueError):
    pass


class ParseError(DataError):
    pass


@dataclass
class RatingsMatrix:
    """Sparse user-item rating store for one domain."""

    domain: str
    users: np.ndarray            # rating -> user index
    items: np.ndarray            # rating -> item index
    ratings: np.ndarray
    user_ids: list               # user index -> external id
    item_ids: list               # item index -> external id

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=np.int64)
        self.items = np.asarray(self.items, dtype=np.int64)
        self.ratings = np.asarray(self.ratings, dtype=np.float64)
        if not (self.users.shape == self.items.shape == self.ratings.shape):
            raise DataError("users, items, ratings must have equal length")
        if self.users.size:
            if self.users.max() >= len(self.user_ids) or self.users.min() < 0:
                raise DataError("user index out of bounds")
            if self.items.max() >= len(self.item_ids) or self.items.min() < 0:
                raise DataError("item index out of bounds")

    @property
    def n_users(self):
        return len(self.user_ids)

    @property
    def n_items(self):
        return len(self.item_ids)

    @property
    def n_ratings(self):
        return self.users.size

    @property
    def sparsity(self):
        total = self.n_users * self.n_items
        return 1.0 - self.n_ratings / total if total else 1.0

    def user_counts(self):
        return np.bincount(self.users, minlength=self.n_users)

    def take(self, idx):
        """Same index space, only the selected ratings."""
        return replace(self, users=self.users[idx], items=self.items[idx],
                       ratings=self.ratings[idx])


def from_triples(domain, triples):
    """Build a RatingsMatrix from (user_id, item_id, rating, timestamp).

    Duplicate (user, item) pairs keep the latest rating by timestamp.
    """
    latest = {}
    for user, item, rating, ts in triples:
        key = (user, item)
        if key not in latest or ts >= latest[key][1]:
            latest[key] = (float(rating), ts)
    user_ids, item_ids = [], []
    u_index, i_index = {}, {}
    users, items, ratings = [], [], []
    for (user, item), (rating, _) in latest.items():
        if user not in u_index:
            u_index[user] = len(user_ids)
            user_ids.append(user)
        if item not in i_index:
            i_index[item] = len(item_ids)
            item_ids.append(item)
        users.append(u_index[user])
        items.append(i_index[item])
        ratings.append(rating)
    return RatingsMatrix(domain=domain, users=np.array(users, dtype=np.int64),
                         items=np.array(items, dtype=np.int64),
                         ratings=np.array(ratings), user_ids=user_ids,
                         item_ids=item_ids)


def ingest_movielens(ratings_path, movies_path, genres):
    """Per-genre rating matrices from MovieLens-1M layout files.

    A rating is replicated into every requested genre listed for its
    movie. Genres absent from the movies file reject the configuration.
    """
    if not genres:
        raise DataError("genres must be non-empty")
    movie_genres = {}
    known = set()
    with open(movies_path, encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("::")
            if len(parts) != 3:
                raise ParseError(f"{movies_path}:{lineno}: expected 3 fields")
            glist = parts[2].split("|")
            movie_genres[parts[0]] = glist
            known.update(glist)
    unknown = [g for g in genres if g not in known]
    if unknown:
        raise DataError(f"unknown genre labels: {unknown}")
    per_genre = {g: [] for g in genres}
    with open(ratings_path, encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("::")
            if len(parts) != 4:
                raise ParseError(f"{ratings_path}:{lineno}: expected 4 fields")
            try:
                user, movie = parts[0], parts[1]
                rating = float(parts[2])
                ts = int(parts[3])
            except ValueError as exc:
                raise ParseError(f"{ratings_path}:{lineno}: {exc}") from None
            for g in movie_genres.get(movie, ()):
                if g in per_genre:
                    per_genre[g].append((user, movie, rating, ts))
    return {g: from_triples(g, per_genre[g]) for g in genres}


def ingest_amazon(review_paths):
    """Rating matrices plus per-user review text per Amazon category.

    Each file holds line-delimited JSON records. Records missing
    reviewerID, asin, or overall are skipped and counted.
    """
    matrices, reviews, skipped = {}, {}, {}
    for category, path in review_paths.items():
        triples = []
        texts = {}
        n_skipped = 0
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"{path}:{lineno}: {exc}") from None
                user = rec.get("reviewerID")
                item = rec.get("asin")
                overall = rec.get("overall")
                if user is None or item is None or overall is None:
                    n_skipped += 1
                    continue
                ts = rec.get("unixReviewTime", 0)
                triples.append((user, item, float(overall), int(ts)))
                text = rec.get("reviewText")
                if text:
                    texts.setdefault(user, []).append(text)
        matrices[category] = from_triples(category, triples)
        reviews[category] = texts
        skipped[category] = n_skipped
    return matrices, reviews, skipped


def filter_min_ratings(matrix, min_count):
    """Drop users with fewer than min_count ratings, to a fixed point."""
    if min_count < 1:
        raise DataError("min_count must be >= 1")
    current = matrix
    while True:
        counts = current.user_counts()
        keep_users = counts >= min_count
        if keep_users.all():
            break
        keep = keep_users[current.users]
        users, items, ratings = (current.users[keep], current.items[keep],
                                 current.ratings[keep])
        if users.size == 0:
            raise DataError(
                f"no users left after min_count={min_count} filtering")
        current = _reindex(current.domain, users, items, ratings,
                           current.user_ids, current.item_ids)
    return current


def restrict_common_users(matrices):
    """Keep only users that appear in every given domain."""
    common = None
    for m in matrices.values():
        ids = set(m.user_ids)
        common = ids if common is None else common & ids
    if not common:
        raise DataError("domains share no users")
    out = {}
    for name, m in matrices.items():
        keep = np.array([m.user_ids[u] in common for u in m.users])
        out[name] = _reindex(m.domain, m.users[keep], m.items[keep],
                             m.ratings[keep], m.user_ids, m.item_ids)
    return out


def _reindex(domain, users, items, ratings, user_ids, item_ids):
    """Rebuild a matrix after dropping entries, compacting both indices."""
    u_seen = np.unique(users)
    i_seen = np.unique(items)
    u_map = np.full(len(user_ids), -1, dtype=np.int64)
    u_map[u_seen] = np.arange(u_seen.size)
    i_map = np.full(len(item_ids), -1, dtype=np.int64)
    i_map[i_seen] = np.arange(i_seen.size)
    return RatingsMatrix(domain=domain, users=u_map[users], items=i_map[items],
                         ratings=ratings,
                         user_ids=[user_ids[u] for u in u_seen],
                         item_ids=[item_ids[i] for i in i_seen])


@dataclass
class UserAlignment:
    """Shared user index across domains plus per-domain presence."""

    user_ids: list                     # global row -> external id
    index: dict                        # external id -> global row
    presence: dict                     # domain -> boolean length-L vector

    @property
    def n_users(self):
        return len(self.user_ids)

    def k_diagonal(self):
        return np.sum([p for p in self.presence.values()], axis=0)

    def rows_for(self, matrix):
        """Global row index for each domain-local user index."""
        return np.array([self.index[uid] for uid in matrix.user_ids],
                        dtype=np.int64)


def align_users(matrices):
    """Shared index over the union of users of all given matrices."""
    if not matrices:
        raise DataError("need at least one matrix")
    user_ids, index = [], {}
    for m in matrices:
        for uid in m.user_ids:
            if uid not in index:
                index[uid] = len(user_ids)
                user_ids.append(uid)
    presence = {}
    for m in matrices:
        p = np.zeros(len(user_ids), dtype=bool)
        rated = np.zeros(m.n_users, dtype=bool)
        rated[m.users] = True
        for local, uid in enumerate(m.user_ids):
            if rated[local]:
                p[index[uid]] = True
        presence[m.domain] = p
    return UserAlignment(user_ids=user_ids, index=index, presence=presence)


@dataclass
class FoldSplit:
    """Rating-level train/validation/test split of one domain."""

    domain: str
    train: np.ndarray            # indices into the matrix's rating arrays
    validation: np.ndarray
    test: np.ndarray
    seed: int
    c: int | None = None
    matrix: RatingsMatrix = field(default=None, repr=False)


def split_folds(matrix, k, seed):
    """k rotating FoldSplits: k-2 train folds, 1 validation, 1 test."""
    if k < 2:
        raise DataError("need k >= 2 folds")
    if k > matrix.n_ratings:
        raise DataError(f"k={k} exceeds the {matrix.n_ratings} ratings")
    rng = np.random.default_rng(seed)
    folds = np.array_split(rng.permutation(matrix.n_ratings), k)
    splits = []
    for f in range(k):
        test = folds[f]
        validation = folds[(f + 1) % k]
        train = np.concatenate(
            [folds[j] for j in range(k) if j != f and j != (f + 1) % k])
        splits.append(FoldSplit(domain=matrix.domain, train=np.sort(train),
                                validation=np.sort(validation),
                                test=np.sort(test), seed=seed, matrix=matrix))
    return splits


def make_cold_start(split, target, c):
    """Censor test users' target-domain training ratings down to <= c.

    Censored ratings move into the validation set so the early-stopping
    signal reflects cold-start error. Non-target splits are unchanged.
    """
    if c < 0:
        raise DataError("c must be non-negative")
    if split.domain != target:
        return replace(split, c=c)
    matrix = split.matrix
    test_users = np.unique(matrix.users[split.test])
    rng = np.random.default_rng(split.seed)
    keep, censored = [], []
    train_users = matrix.users[split.train]
    is_test_user = np.isin(train_users, test_users)
    keep_mask = ~is_test_user
    for u in test_users:
        owned = split.train[train_users == u]
        if owned.size <= c:
            keep.extend(owned.tolist())
        else:
            chosen = rng.choice(owned, size=c, replace=False) if c else \
                np.empty(0, dtype=np.int64)
            keep.extend(np.sort(chosen).tolist())
            censored.extend(np.setdiff1d(owned, chosen).tolist())
    train = np.sort(np.concatenate(
        [split.train[keep_mask], np.array(keep, dtype=np.int64)]))
    validation = np.sort(np.concatenate(
        [split.validation, np.array(censored, dtype=np.int64)]))
    return replace(split, train=train, validation=validation, c=c)


@dataclass
class ColdStartFold:
    """User-level cold-start evaluation fold.

    One fold of target-domain users is held out for testing and the
    next for validation; both groups keep at most c training ratings in
    the target domain. Auxiliary domains are untouched.
    """

    target: str
    train: dict                  # domain -> RatingsMatrix (target censored)
    val_idx: np.ndarray          # indices into the target matrix
    test_idx: np.ndarray
    test_users: np.ndarray
    val_users: np.ndarray
    c: int
    seed: int
    fold: int


def cold_start_user_folds(matrices, target, n_folds, c, seed):
    """User-level cold-start folds over the target domain.

    Target users are partitioned into n_folds groups; in fold f, group
    f is the test cohort and group f+1 the validation cohort. Each
    cohort member keeps at most c target training ratings (uniform
    subsample under the seed); their remaining ratings become the
    cohort's evaluation set.
    """
    if target not in matrices:
        raise DataError(f"target domain {target!r} missing")
    if c < 0:
        raise DataError("c must be non-negative")
    tgt = matrices[target]
    rated = np.unique(tgt.users)
    # with 2 folds the test and validation cohorts would cover every
    # target user, leaving no target training data at c=0
    if n_folds < 3 or n_folds > rated.size:
        raise DataError(f"need 3 <= n_folds <= {rated.size} target users")
    rng = np.random.default_rng(seed)
    groups = np.array_split(rng.permutation(rated), n_folds)
    folds = []
    for f in range(n_folds):
        test_users = np.sort(groups[f])
        val_users = np.sort(groups[(f + 1) % n_folds])
        train_mask = np.ones(tgt.n_ratings, dtype=bool)
        eval_idx = {"test": [], "val": []}
        fold_rng = np.random.default_rng(np.random.SeedSequence(
            entropy=seed, spawn_key=(f,)))
        for cohort, users in (("test", test_users), ("val", val_users)):
            for u in users:
                owned = np.flatnonzero(tgt.users == u)
                if owned.size <= c:
                    continue
                kept = fold_rng.choice(owned, size=c, replace=False) if c \
                    else np.empty(0, dtype=np.int64)
                held = np.setdiff1d(owned, kept)
                train_mask[held] = False
                eval_idx[cohort].extend(held.tolist())
        train = dict(matrices)
        train[target] = tgt.take(np.flatnonzero(train_mask))
        folds.append(ColdStartFold(
            target=target, train=train,
            val_idx=np.sort(np.array(eval_idx["val"], dtype=np.int64)),
            test_idx=np.sort(np.array(eval_idx["test"], dtype=np.int64)),
            test_users=test_users, val_users=val_users,
            c=c, seed=seed, fold=f))
    return folds


def save_matrix_csv(matrix, path):
    """Canonical dump: user_index,item_index,rating rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_index", "item_index", "rating"])
        for u, i, r in zip(matrix.users, matrix.items, matrix.ratings):
            writer.writerow([int(u), int(i), repr(float(r))])


def save_manifest(matrix, path):
    with open(path, "w") as fh:
        json.dump({"domain": matrix.domain,
                   "user_ids": list(map(str, matrix.user_ids)),
                   "item_ids": list(map(str, matrix.item_ids))}, fh)


def load_matrix_csv(csv_path, manifest_path):
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    users, items, ratings = [], [], []
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            users.append(int(row["user_index"]))
            items.append(int(row["item_index"]))
            ratings.append(float(row["rating"]))
    return RatingsMatrix(domain=manifest["domain"],
                         users=np.array(users, dtype=np.int64),
                         items=np.array(items, dtype=np.int64),
                         ratings=np.array(ratings),
                         user_ids=manifest["user_ids"],
                         item_ids=manifest["item_ids"])


def save_domains(matrices, out_dir):
    """One CSV + manifest pair per domain under out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    for name, m in matrices.items():
        safe = name.replace("/", "_").replace(" ", "_")
        save_matrix_csv(m, os.path.join(out_dir, f"{safe}.csv"))
        save_manifest(m, os.path.join(out_dir, f"{safe}.manifest.json"))
