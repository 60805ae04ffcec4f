"""Topic-model user features from review text.

A minimal collapsed-Gibbs LDA over one document per user (all of that
user's reviews concatenated). The fitted user-topic distributions form
an auxiliary view for the multi-view solver.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from numba import njit

from .gcca import make_view


class TopicsError(ValueError):
    pass


DEFAULT_STOPWORDS = (
    "a an and are as at be but by for from has have i in is it its of on "
    "or that the this to was were will with not you your me my we our they"
).split()

_TOKEN = re.compile(r"[a-z]+")


@dataclass
class ReviewCorpus:
    """One bag-of-words document per user."""

    user_ids: list               # document -> external user id
    vocabulary: dict             # token -> index
    doc_tokens: list             # per document: array of token indices

    @property
    def n_docs(self):
        return len(self.doc_tokens)

    @property
    def n_words(self):
        return len(self.vocabulary)


def build_corpus(reviews, stopwords=DEFAULT_STOPWORDS, min_token_count=1):
    """Tokenize per-user review texts into a bag-of-words corpus.

    Lowercases, keeps alphabetic tokens only, removes stopwords, and
    drops tokens occurring fewer than min_token_count times overall.
    """
    stop = set(stopwords)
    raw = {}
    counts = {}
    for uid, texts in reviews.items():
        tokens = []
        for text in texts:
            for tok in _TOKEN.findall(text.lower()):
                if tok in stop:
                    continue
                tokens.append(tok)
                counts[tok] = counts.get(tok, 0) + 1
        if tokens:
            raw[uid] = tokens
    vocabulary = {}
    for tok in sorted(t for t, c in counts.items() if c >= min_token_count):
        vocabulary[tok] = len(vocabulary)
    user_ids, doc_tokens = [], []
    for uid, tokens in raw.items():
        idx = [vocabulary[t] for t in tokens if t in vocabulary]
        if idx:
            user_ids.append(uid)
            doc_tokens.append(np.array(idx, dtype=np.int64))
    if not doc_tokens:
        raise TopicsError("corpus is empty after filtering")
    return ReviewCorpus(user_ids=user_ids, vocabulary=vocabulary,
                        doc_tokens=doc_tokens)


@dataclass
class TopicModel:
    T: int
    phi: np.ndarray              # T x V topic-word distributions
    theta: np.ndarray            # docs x T user-topic distributions
    alpha: float
    beta: float
    iterations: int
    seed: int
    user_ids: list
    vocabulary: dict

    def save(self, path):
        vocab = sorted(self.vocabulary, key=self.vocabulary.get)
        np.savez(path, phi=self.phi, theta=self.theta, T=self.T,
                 alpha=self.alpha, beta=self.beta,
                 iterations=self.iterations, seed=self.seed,
                 user_ids=np.array(self.user_ids, dtype=object),
                 vocabulary=np.array(vocab, dtype=object))


@njit(cache=True)
def _gibbs(doc_of, word_of, z, ndt, ntw, nt, alpha, beta, iterations, seed):
    np.random.seed(seed)
    T = ndt.shape[1]
    V = ntw.shape[1]
    probs = np.empty(T)
    for _ in range(iterations):
        for pos in range(z.shape[0]):
            d = doc_of[pos]
            w = word_of[pos]
            t = z[pos]
            ndt[d, t] -= 1
            ntw[t, w] -= 1
            nt[t] -= 1
            total = 0.0
            for tt in range(T):
                p = (ndt[d, tt] + alpha) * (ntw[tt, w] + beta) \
                    / (nt[tt] + V * beta)
                total += p
                probs[tt] = total
            u = np.random.random() * total
            t = 0
            while probs[t] < u:
                t += 1
            z[pos] = t
            ndt[d, t] += 1
            ntw[t, w] += 1
            nt[t] += 1


def fit_lda(corpus, T=50, alpha=None, beta=0.01, iterations=500, seed=0):
    """Collapsed Gibbs sampling; estimates from the final sample."""
    if T < 1 or iterations < 1:
        raise TopicsError("T and iterations must be >= 1")
    if alpha is None:
        alpha = 50.0 / T
    doc_of = np.concatenate([np.full(len(toks), d, dtype=np.int64)
                             for d, toks in enumerate(corpus.doc_tokens)])
    word_of = np.concatenate(corpus.doc_tokens)
    rng = np.random.default_rng(seed)
    z = rng.integers(0, T, size=word_of.size)
    D, V = corpus.n_docs, corpus.n_words
    ndt = np.zeros((D, T), dtype=np.int64)
    ntw = np.zeros((T, V), dtype=np.int64)
    np.add.at(ndt, (doc_of, z), 1)
    np.add.at(ntw, (z, word_of), 1)
    nt = ntw.sum(axis=1)
    _gibbs(doc_of, word_of, z, ndt, ntw, nt, alpha, beta, iterations,
           int(seed) & 0x7FFFFFFF)
    phi = (ntw + beta) / (ntw.sum(axis=1, keepdims=True) + V * beta)
    theta = (ndt + alpha) / (ndt.sum(axis=1, keepdims=True) + T * alpha)
    return TopicModel(T=T, phi=phi, theta=theta, alpha=alpha, beta=beta,
                      iterations=iterations, seed=seed,
                      user_ids=list(corpus.user_ids),
                      vocabulary=dict(corpus.vocabulary))


def user_topic_view(model, alignment, domain="lda"):
    """ViewMatrix of mean-centered user-topic rows over the shared index.

    Users without reviews get zero rows with presence false.
    """
    L = alignment.n_users
    X = np.zeros((L, model.T))
    presence = np.zeros(L, dtype=bool)
    for doc, uid in enumerate(model.user_ids):
        row = alignment.index.get(uid)
        if row is not None:
            X[row] = model.theta[doc]
            presence[row] = True
    if not presence.any():
        raise TopicsError("no reviewed users appear in the alignment")
    return make_view(X, presence, domain=domain)
