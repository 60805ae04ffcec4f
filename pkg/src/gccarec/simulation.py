"""Synthetic multi-view data generation and the GCCA-vs-ISSM study.

Planted model: an orthonormal L x M base, a random M x M mixing matrix
per view, additive Gaussian noise, and a fraction of rows zeroed per
view to simulate samples missing from individual views. Both solver
variants reconstruct each view and are scored against the complete
(pre-masking) matrices, separately over all rows and over masked rows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, asdict

import numpy as np
from scipy import linalg

from .gcca import make_view, fit_gcca, reconstruct_view, RECON_RCOND


@dataclass
class SimConfig:
    L: int
    M: int
    n: int
    s: float
    sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.s < 1:
            raise ValueError("sparsity s must be in [0, 1)")
        if self.M > self.L:
            raise ValueError("latent dimension M must not exceed L")
        if self.n < 2:
            raise ValueError("need at least 2 domains")


@dataclass
class SimResult:
    mse_all_gcca: float
    mse_all_issm: float
    mse_missing_gcca: float
    mse_missing_issm: float

    @property
    def improvement_ratio(self):
        if self.mse_missing_gcca <= 0:
            return float("nan")
        return (self.mse_missing_gcca - self.mse_missing_issm) / self.mse_missing_gcca


def _sample_masks(L, n, n_missing, rng, max_retries=50):
    """Per-view present-row masks with every row present in >= 1 view.

    Rows that come out absent everywhere are repaired by unmasking them
    in one view and masking a swap candidate there instead, keeping the
    per-view missing count exact.
    """
    masks = np.ones((n, L), dtype=bool)
    for d in range(n):
        masks[d, rng.choice(L, size=n_missing, replace=False)] = False
    for _ in range(max_retries):
        uncovered = np.flatnonzero(masks.sum(axis=0) == 0)
        if uncovered.size == 0:
            return masks
        for i in uncovered:
            d = int(rng.integers(n))
            candidates = np.flatnonzero(masks[d] & (masks.sum(axis=0) >= 2))
            if candidates.size == 0:
                continue
            j = candidates[rng.integers(candidates.size)]
            masks[d, i] = True
            masks[d, j] = False
    raise RuntimeError("could not repair view masks to cover every row")


def generate_synthetic(cfg):
    """Views plus the complete matrices they were masked from."""
    rng = np.random.default_rng(cfg.seed)
    G0 = linalg.qr(rng.standard_normal((cfg.L, cfg.M)), mode="economic")[0]
    n_missing = int(cfg.s * cfg.L)
    masks = _sample_masks(cfg.L, cfg.n, n_missing, rng)
    views, complete = [], []
    for d in range(cfg.n):
        A = rng.standard_normal((cfg.M, cfg.M))
        B = rng.standard_normal((cfg.L, cfg.M))
        X_complete = G0 @ A + cfg.sigma * B
        X_sparse = X_complete.copy()
        X_sparse[~masks[d]] = 0.0
        views.append(make_view(X_sparse, masks[d].copy(), domain=f"view{d}"))
        complete.append(X_complete)
    return views, complete


def _view_mse(recon, complete, row_mask=None):
    if row_mask is not None:
        recon, complete = recon[row_mask], complete[row_mask]
    if recon.size == 0:
        return 0.0
    return float(np.mean((recon - complete) ** 2))


def run_trial(cfg, k=None, rcond=RECON_RCOND):
    """Fit both variants on one synthetic draw and score reconstructions."""
    if k is None:
        k = cfg.M
    views, complete = generate_synthetic(cfg)
    scores = {}
    for variant in ("standard", "issm"):
        model = fit_gcca(views, k, variant=variant)
        mse_all, mse_missing = [], []
        for v, X_complete in zip(views, complete):
            recon = reconstruct_view(model, v.domain, rcond=rcond,
                                     add_offset=False)
            # the view was generated uncentered; add back the removed
            # column means before comparing
            recon = recon + v.offset
            mse_all.append(_view_mse(recon, X_complete))
            mse_missing.append(_view_mse(recon, X_complete, ~v.presence))
        scores[variant] = (float(np.mean(mse_all)), float(np.mean(mse_missing)))
    return SimResult(
        mse_all_gcca=scores["standard"][0],
        mse_all_issm=scores["issm"][0],
        mse_missing_gcca=scores["standard"][1],
        mse_missing_issm=scores["issm"][1],
    )


SWEEP_FIELDS = ("n", "s", "L", "k", "reps",
                "mse_all_gcca", "mse_all_issm",
                "mse_missing_gcca", "mse_missing_issm",
                "improvement_mean", "improvement_std")


def sweep(n_values, s_values, L_values, reps, M=10, sigma=0.1, k=None,
          root_seed=0, rcond=RECON_RCOND, keep_trials=False):
    """Grid sweep; one aggregated row per (n, s, L) cell.

    Per-trial seeds derive from the root seed and the cell coordinates,
    so results do not depend on iteration order.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    rows, trials = [], {}
    for n in n_values:
        for s in s_values:
            for L in L_values:
                results = []
                for rep in range(reps):
                    seed = int(np.random.SeedSequence(
                        entropy=root_seed,
                        spawn_key=(n, int(round(s * 1000)), L, rep),
                    ).generate_state(1)[0])
                    cfg = SimConfig(L=L, M=M, n=n, s=s, sigma=sigma, seed=seed)
                    results.append(run_trial(cfg, k=k, rcond=rcond))
                gm = float(np.mean([r.mse_missing_gcca for r in results]))
                im = float(np.mean([r.mse_missing_issm for r in results]))
                ratios = np.array(
                    [r.improvement_ratio for r in results], dtype=float)
                rows.append({
                    "n": n, "s": s, "L": L,
                    "k": k if k is not None else M, "reps": reps,
                    "mse_all_gcca": float(np.mean(
                        [r.mse_all_gcca for r in results])),
                    "mse_all_issm": float(np.mean(
                        [r.mse_all_issm for r in results])),
                    "mse_missing_gcca": gm,
                    "mse_missing_issm": im,
                    "improvement_mean": (gm - im) / gm if gm > 0 else float("nan"),
                    "improvement_std": float(np.std(ratios)),
                })
                if keep_trials:
                    trials[(n, s, L)] = results
    if keep_trials:
        return rows, trials
    return rows


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({f: row[f] for f in SWEEP_FIELDS})
