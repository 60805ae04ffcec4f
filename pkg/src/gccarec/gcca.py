"""Multi-view canonical correlation solvers.

Implements pairwise CCA, MAX-VAR GCCA with missing samples (rows absent
from individual views), the inverse-sum-of-selection-matrices variant
(ISSM), and a memory-efficient truncated-SVD approximation of ISSM that
never materializes the L x L projection-sum matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import eigsh

VARIANTS = ("standard", "issm", "fast_issm")

# relative ridge applied to every Gram-matrix inversion; views are
# rank-deficient whenever fewer rows are present than columns
GRAM_RIDGE = 1e-10

# relative singular-value cutoff for the reconstruction pseudoinverse;
# truncation (rather than a fixed ridge) keeps well-conditioned cases
# exact while taming trials where a component is almost invisible in
# one view
RECON_RCOND = 1e-2


class GccaError(ValueError):
    pass


class MemoryBudgetError(GccaError):
    """Exact solver refused: the L x L matrix would exceed the budget."""


@dataclass
class ViewMatrix:
    """Row-aligned observation matrix for one view.

    Rows are aligned users; rows of absent users are exactly zero and
    flagged in ``presence``. ``offset`` holds the column means removed
    from present rows, so original features are ``X[i] + offset`` for
    present rows.
    """

    X: np.ndarray
    presence: np.ndarray
    domain: str = ""
    offset: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.presence = np.asarray(self.presence, dtype=bool)
        if self.X.shape[0] != self.presence.shape[0]:
            raise GccaError("presence length must match row count")
        if self.offset is None:
            self.offset = np.zeros(self.X.shape[1])

    @property
    def n_rows(self):
        return self.X.shape[0]

    @property
    def width(self):
        return self.X.shape[1]


def make_view(features, presence, domain=""):
    """Build a centered ViewMatrix from raw per-user features.

    Column means are computed over present rows only; absent rows are
    zeroed afterwards so they stay inert in the solver.
    """
    X = np.array(features, dtype=np.float64, copy=True)
    presence = np.asarray(presence, dtype=bool)
    if not presence.any():
        raise GccaError("view has no present rows")
    mu = X[presence].mean(axis=0)
    X[presence] -= mu
    X[~presence] = 0.0
    return ViewMatrix(X=X, presence=presence, domain=domain, offset=mu)


@dataclass
class CcaModel:
    a: np.ndarray        # k_x x k canonical basis of the first view
    b: np.ndarray        # k_y x k canonical basis of the second view
    rho: np.ndarray      # canonical correlations, descending


@dataclass
class FastConfig:
    m: int               # truncation rank per view
    r: float = 1e-8      # per-view ridge noise

    def __post_init__(self):
        if self.m < 1:
            raise GccaError("truncation rank m must be >= 1")
        if self.r <= 0:
            raise GccaError("ridge noise r must be positive")


@dataclass
class GccaModel:
    G: np.ndarray                   # L x k group configuration
    W: list                         # per-view k_d x k canonical components
    variant: str
    eigenvalues: np.ndarray         # length-k, descending
    k: int
    n_views: int
    presence_count: np.ndarray      # diagonal of K = sum of selection matrices
    views: list = field(default_factory=list, repr=False)

    def view_index(self, domain):
        for idx, v in enumerate(self.views):
            if v.domain == domain:
                return idx
        raise GccaError(f"view {domain!r} not in model")


def _ridge_gram(X):
    gram = X.T @ X
    eps = GRAM_RIDGE * np.trace(gram) / X.shape[1]
    if eps <= 0:
        eps = GRAM_RIDGE
    return gram + eps * np.eye(X.shape[1])


def _fix_signs(vectors):
    """Make the first non-negligible coordinate of each column positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300))
        if nz.size and col[nz[0]] < 0:
            out[:, j] = -col
    return out


def fit_cca(X, Y, ridge=1e-8):
    """All canonical correlation pairs of two row-aligned sample matrices.

    Solves the generalized eigenproblem through whitening: with
    Cxx^-1/2 Cxy Cyy^-1/2 = U S V^T, the bases are a = Cxx^-1/2 U and
    b = Cyy^-1/2 V, and rho = S. Bases are scaled so canonical variates
    have unit variance.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[0] != Y.shape[0]:
        raise GccaError("views must have the same sample count")
    n = X.shape[0]
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    Cxx = Xc.T @ Xc / (n - 1)
    Cyy = Yc.T @ Yc / (n - 1)
    Cxy = Xc.T @ Yc / (n - 1)
    Cxx += ridge * np.trace(Cxx) / Cxx.shape[0] * np.eye(Cxx.shape[0])
    Cyy += ridge * np.trace(Cyy) / Cyy.shape[0] * np.eye(Cyy.shape[0])

    def inv_sqrt(C, label):
        w, V = linalg.eigh(C)
        if w.min() <= 0:
            raise GccaError(
                f"{label} covariance is rank deficient; increase the ridge")
        return (V / np.sqrt(w)) @ V.T

    ix = inv_sqrt(Cxx, "first-view")
    iy = inv_sqrt(Cyy, "second-view")
    U, S, Vt = linalg.svd(ix @ Cxy @ iy, full_matrices=False)
    k = min(X.shape[1], Y.shape[1])
    a = _fix_signs(ix @ U[:, :k])
    b = _fix_signs(iy @ Vt[:k].T)
    rho = np.clip(S[:k], 0.0, 1.0)
    return CcaModel(a=a, b=b, rho=rho)


def _check_views(views):
    if len(views) < 2:
        raise GccaError("need at least 2 views")
    L = views[0].n_rows
    for v in views:
        if v.n_rows != L:
            raise GccaError("views must share the row alignment")
    count = np.sum([v.presence for v in views], axis=0)
    if (count == 0).any():
        missing = np.flatnonzero(count == 0)[:5]
        raise GccaError(
            f"rows {missing.tolist()} are absent from every view")
    return count.astype(np.float64)


def _projection_sum(views, literal_issm=False):
    L = views[0].n_rows
    M = np.zeros((L, L))
    for v in views:
        X = v.X
        P = X @ linalg.solve(_ridge_gram(X), X.T, assume_a="pos")
        if literal_issm:
            # printed form K^(d) - X (X^T X)^-1 X^T of the ISSM derivation;
            # inverts the eigen-ordering, kept for investigation only
            P = np.diag(v.presence.astype(np.float64)) - P
        M += P
    return M


def _top_eigh(M, k):
    L = M.shape[0]
    if k > L:
        raise GccaError(f"k={k} exceeds matrix size {L}")
    if L > 800 and k <= L // 10:
        v0 = np.full(L, 1.0 / np.sqrt(L))
        w, V = eigsh(M, k=k, which="LA", v0=v0)
        order = np.argsort(w)[::-1]
        w, V = w[order], V[:, order]
    else:
        w, V = linalg.eigh(M, subset_by_index=[L - k, L - 1])
        w, V = w[::-1], V[:, ::-1]
    return w, V


def _scale_group(G_star, presence_count, n_views, variant):
    root = np.sqrt(presence_count)
    if variant == "standard":
        scale = 1.0 / root
    else:
        scale = root
    return np.sqrt(n_views) * G_star * scale[:, None]


def _components(views, G):
    return [linalg.solve(_ridge_gram(v.X), v.X.T @ G, assume_a="pos")
            for v in views]


def estimate_exact_bytes(n_rows):
    """Working-set estimate for the exact solver's L x L matrix."""
    return 8 * n_rows * n_rows


def fit_gcca(views, k, variant="standard", memory_budget=None,
             issm_projection="projection"):
    """MAX-VAR GCCA over views with missing rows.

    ``variant`` selects the group-configuration constraint: "standard"
    scales eigenvectors by K^-1/2 (infrequently observed rows weigh
    more), "issm" by K^+1/2 (rows observed in many views weigh more).

    The eigenproblem is the same for both: M = sum of per-view ridge
    projections, where all-zero rows of a view contribute nothing.
    """
    if variant not in ("standard", "issm"):
        raise GccaError(f"unknown variant {variant!r}")
    presence_count = _check_views(views)
    L = views[0].n_rows
    if memory_budget is not None and estimate_exact_bytes(L) > memory_budget:
        raise MemoryBudgetError(
            f"exact solver needs ~{estimate_exact_bytes(L) / 2**20:.0f} MB "
            f"for the {L}x{L} projection sum, over the "
            f"{memory_budget / 2**20:.0f} MB budget; use the fast_issm variant")
    max_rank = sum(min(int(v.presence.sum()), v.width) for v in views)
    if k > max_rank:
        raise GccaError(
            f"k={k} exceeds the attainable rank {max_rank} of the projection sum")
    M = _projection_sum(views, literal_issm=(issm_projection == "literal"))
    eigenvalues, G_star = _top_eigh(M, k)
    G_star = _fix_signs(G_star)
    G = _scale_group(G_star, presence_count, len(views), variant)
    W = _components(views, G)
    return GccaModel(G=G, W=W, variant=variant, eigenvalues=eigenvalues,
                     k=k, n_views=len(views), presence_count=presence_count,
                     views=list(views))


def fit_fast_gcca_issm(views, k, cfg, paper_scaling=False):
    """Memory-efficient ISSM via per-view rank-m SVD.

    Builds the L x (n*m) factor [A1 T1 ... An Tn] whose outer product
    equals the (truncated) projection sum, and takes its top-k left
    singular vectors; the L x L matrix is never formed. Additional
    memory is O(L * (n*m + k)).

    ``paper_scaling`` premultiplies the factor by K^1/2 before the SVD;
    the default skips that step so the result matches the exact ISSM
    solver when m is the full rank and r -> 0.
    """
    presence_count = _check_views(views)
    for v in views:
        if cfg.m > min(v.n_rows, v.width):
            raise GccaError(
                f"truncation rank {cfg.m} exceeds view {v.domain!r} size")
    blocks = []
    for v in views:
        A, S, _ = linalg.svd(v.X, full_matrices=False)
        A, S = A[:, :cfg.m], S[:cfg.m]
        T = S / np.sqrt(cfg.r + S * S)
        blocks.append(A * T)
    M_tilde = np.hstack(blocks)
    if paper_scaling:
        M_tilde = M_tilde * np.sqrt(presence_count)[:, None]
    if k > min(M_tilde.shape):
        raise GccaError(
            f"k={k} exceeds the attainable rank {min(M_tilde.shape)}")
    U, S, _ = linalg.svd(M_tilde, full_matrices=False)
    G_star = _fix_signs(U[:, :k])
    eigenvalues = S[:k] ** 2
    G = _scale_group(G_star, presence_count, len(views), "issm")
    W = _components(views, G)
    return GccaModel(G=G, W=W, variant="fast_issm", eigenvalues=eigenvalues,
                     k=k, n_views=len(views), presence_count=presence_count,
                     views=list(views))


def reconstruct_view(model, domain, rcond=RECON_RCOND, add_offset=True):
    """Least-squares reconstruction of a view from the group configuration.

    Solves U_hat W ~= G through a truncated-SVD right pseudoinverse of
    the (generally non-square) k_d x k component matrix.
    """
    idx = model.view_index(domain)
    W = model.W[idx]
    U_hat = model.G @ np.linalg.pinv(W, rcond=rcond)
    if add_offset:
        U_hat = U_hat + model.views[idx].offset
    return U_hat


def constraint_residual(model):
    """|| G^T K^{+-1} G - nI ||_F / n, per the variant's constraint."""
    K = model.presence_count
    if model.variant == "standard":
        gram = model.G.T @ (model.G * K[:, None])
    else:
        gram = model.G.T @ (model.G / K[:, None])
    n = model.n_views
    return linalg.norm(gram - n * np.eye(model.k)) / n
