"""Cross-domain cold-start training and evaluation.

The trainer alternates per-domain matrix factorization with a GCCA fit
over the user factor matrices: each iteration refits MF (warm-started),
projects the user factors into a shared space, and replaces every
domain's user factors with their reconstruction from that space. Cold
users absent from the target domain receive transferred factors through
the views where they are present.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .data import DataError, align_users, cold_start_user_folds
from .gcca import FastConfig, fit_fast_gcca_issm, fit_gcca, make_view, \
    reconstruct_view
from .mf import TrainConfig, fit_mf, offset_baseline


class PipelineError(ValueError):
    pass


@dataclass
class PipelineConfig:
    target: str
    auxiliaries: list
    k_mf: int = 50
    k_gcca: int = 75
    variant: str = "issm"
    max_iterations: int = 20
    tol: float = 1e-4
    mf_config: TrainConfig = field(default_factory=TrainConfig)
    warm_epochs: int = 10
    extra_views: list = field(default_factory=list)
    fast_m: int | None = None
    fast_r: float = 1e-8
    memory_budget: int | None = None
    warm_start: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.auxiliaries:
            raise PipelineError("need at least one auxiliary domain")
        if self.target in self.auxiliaries:
            raise PipelineError("target must not be an auxiliary")
        if self.k_mf < 1 or self.k_gcca < 1:
            raise PipelineError("k_mf and k_gcca must be >= 1")

    @property
    def domains(self):
        return [self.target] + list(self.auxiliaries)


@dataclass
class CrossDomainModel:
    gcca: object
    target_factors: np.ndarray     # reconstructed target user factors
    target_items: np.ndarray
    mu_t: float
    iteration_trace: list          # validation MSE per iteration
    best_iteration: int
    alignment: object
    target_rows: np.ndarray        # target-local user -> global row
    config: PipelineConfig


def _fit_view_gcca(views, cfg):
    if cfg.variant in ("standard", "issm"):
        return fit_gcca(views, cfg.k_gcca, variant=cfg.variant,
                        memory_budget=cfg.memory_budget)
    if cfg.variant == "fast_issm":
        m = cfg.fast_m if cfg.fast_m is not None else cfg.k_mf
        return fit_fast_gcca_issm(views, cfg.k_gcca,
                                  FastConfig(m=m, r=cfg.fast_r))
    raise PipelineError(f"unknown variant {cfg.variant!r}")


def _resolve_extra_views(cfg, alignment):
    views = []
    for provider in cfg.extra_views:
        views.append(provider(alignment) if callable(provider) else provider)
    return views


def _val_mse(mu_t, U, V, matrix, idx):
    pred = mu_t + np.sum(U[matrix.users[idx]] * V[matrix.items[idx]], axis=1)
    clamp = (1.0, 5.0)
    pred = np.clip(pred, clamp[0], clamp[1])
    return float(np.mean((matrix.ratings[idx] - pred) ** 2))


def train_cross_domain(matrices, fold, cfg):
    """Alternating MF / GCCA training for one cold-start fold.

    ``matrices`` holds the uncensored per-domain data (used only for
    index spaces); ``fold`` supplies the censored training matrices and
    the validation ratings that drive early stopping. Returns the model
    of the iteration with minimum validation MSE.
    """
    for name in cfg.domains:
        if name not in fold.train:
            raise PipelineError(f"domain {name!r} missing from the fold")
    train = {name: fold.train[name] for name in cfg.domains}
    alignment = align_users([train[name] for name in cfg.domains])
    rows = {name: alignment.rows_for(train[name]) for name in cfg.domains}
    target = cfg.target
    tgt = train[target]
    L = alignment.n_users

    models = {name: None for name in cfg.domains}
    best = None
    trace = []
    for it in range(cfg.max_iterations):
        for name in cfg.domains:
            epochs = cfg.mf_config.epochs if models[name] is None \
                else cfg.warm_epochs
            mf_cfg = replace(cfg.mf_config, epochs=epochs,
                             seed=cfg.mf_config.seed + it)
            models[name] = fit_mf(train[name], mf_cfg, cfg.k_mf,
                                  warm_start=models[name])
        views = _resolve_extra_views(cfg, alignment)
        covered = np.zeros(L, dtype=bool)
        for name in cfg.domains:
            covered |= alignment.presence[name]
        for v in views:
            covered |= v.presence
        covered = np.flatnonzero(covered)
        views = [make_view(v.X[covered] + v.offset, v.presence[covered],
                           domain=v.domain) for v in views]
        for name in cfg.domains:
            X = np.zeros((L, cfg.k_mf))
            X[rows[name]] = models[name].U
            views.append(make_view(X[covered],
                                   alignment.presence[name][covered],
                                   domain=name))
        if len(views) < 2:
            raise PipelineError("need at least 2 views")
        try:
            gcca = _fit_view_gcca(views, cfg)
        except Exception as exc:
            raise type(exc)(f"iteration {it}: {exc}") from exc
        for name in cfg.domains:
            recon = np.zeros((L, cfg.k_mf))
            recon[covered] = reconstruct_view(gcca, name)
            models[name] = replace(models[name], U=recon[rows[name]])
        U_t = models[target].U
        V_t = models[target].V
        mu_t = models[target].mu
        vmse = _val_mse(mu_t, U_t, V_t, matrices[target], fold.val_idx)
        trace.append(vmse)
        if best is None or vmse < best[0]:
            best = (vmse, it, CrossDomainModel(
                gcca=gcca, target_factors=U_t.copy(),
                target_items=V_t.copy(), mu_t=mu_t,
                iteration_trace=[], best_iteration=it,
                alignment=alignment, target_rows=rows[target], config=cfg))
        if it > 0 and (trace[-2] - vmse) < cfg.tol * max(trace[-2], 1e-12):
            break
    model = best[2]
    model.iteration_trace = trace
    return model


def predict_target(model, user, item, clamp=(1.0, 5.0)):
    """mu_t + transferred-user-factor prediction for one target cell."""
    U, V = model.target_factors, model.target_items
    if not (0 <= user < U.shape[0]) or not (0 <= item < V.shape[0]):
        raise PipelineError(f"index ({user}, {item}) out of target range")
    score = model.mu_t + float(U[user] @ V[item])
    if clamp is not None:
        score = min(max(score, clamp[0]), clamp[1])
    return score


def predict_target_batch(model, users, items, clamp=(1.0, 5.0)):
    scores = model.mu_t + np.sum(model.target_factors[users]
                                 * model.target_items[items], axis=1)
    if clamp is not None:
        scores = np.clip(scores, clamp[0], clamp[1])
    return scores


@dataclass
class EvalReport:
    target: str
    auxiliaries: list
    c: int
    n_folds: int
    seed: int
    variant: str
    fold_mse: dict                # method -> list of per-fold MSEs
    mean_mse: dict                # method -> mean over folds

    def improvement(self, method="method", baseline="offset"):
        b, m = self.mean_mse[baseline], self.mean_mse[method]
        return (b - m) / b

    def to_rows(self):
        rows = []
        aux = "+".join(self.auxiliaries)
        for method, mses in self.fold_mse.items():
            for f, mse in enumerate(mses):
                rows.append({"target": self.target, "auxiliary_set": aux,
                             "c": self.c, "fold": f, "method": method,
                             "mse": mse,
                             "improvement": (self.mean_mse["offset"] - mse)
                             / self.mean_mse["offset"]})
        return rows

    def to_summary(self):
        return {"target": self.target, "auxiliaries": list(self.auxiliaries),
                "c": self.c, "n_folds": self.n_folds, "seed": self.seed,
                "variant": self.variant, "mean_mse": dict(self.mean_mse),
                "improvement_over_offset":
                    {m: self.improvement(m) for m in self.mean_mse
                     if m != "offset"}}


REPORT_FIELDS = ("target", "auxiliary_set", "c", "fold", "method", "mse",
                 "improvement")


def write_report_csv(reports, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
        writer.writeheader()
        for report in reports:
            for row in report.to_rows():
                writer.writerow(row)


def write_report_json(reports, path):
    with open(path, "w") as fh:
        json.dump([r.to_summary() for r in reports], fh, indent=2,
                  sort_keys=True)


def evaluate_cold_start(matrices, cfg, c, n_folds=5, seed=None):
    """Offset / MF / cross-domain test MSE over cold-start user folds.

    For each fold the target's test-cohort users keep at most c training
    ratings; their held-out ratings form the test set. MF here is the
    single-domain factorization of the censored target matrix, so at
    c=0 its cold predictions coincide with the Offset baseline.
    """
    seed = cfg.seed if seed is None else seed
    folds = cold_start_user_folds(matrices, cfg.target, n_folds, c, seed)
    tgt = matrices[cfg.target]
    fold_mse = {"offset": [], "mf": [], "method": []}
    for fold in folds:
        if fold.test_idx.size == 0:
            raise PipelineError(
                f"fold {fold.fold}: no test ratings for c={c}")
        users = tgt.users[fold.test_idx]
        items = tgt.items[fold.test_idx]
        truth = tgt.ratings[fold.test_idx]
        censored = fold.train[cfg.target]

        offset = offset_baseline(censored)
        fold_mse["offset"].append(
            float(np.mean((truth - offset.predict()) ** 2)))

        mf_model = fit_mf(censored, cfg.mf_config, cfg.k_mf)
        pred = np.clip(mf_model.mu
                       + np.sum(mf_model.U[users] * mf_model.V[items], axis=1),
                       1.0, 5.0)
        fold_mse["mf"].append(float(np.mean((truth - pred) ** 2)))

        model = train_cross_domain(matrices, fold, cfg)
        pred = predict_target_batch(model, users, items)
        fold_mse["method"].append(float(np.mean((truth - pred) ** 2)))
    mean_mse = {m: float(np.mean(v)) for m, v in fold_mse.items()}
    return EvalReport(target=cfg.target, auxiliaries=list(cfg.auxiliaries),
                      c=c, n_folds=n_folds, seed=seed, variant=cfg.variant,
                      fold_mse=fold_mse, mean_mse=mean_mse)


def sweep_cold_start(matrices, cfg, c_values, n_folds=5, seed=None):
    """Independent evaluate_cold_start runs over a grid of caps c."""
    if not c_values:
        raise PipelineError("c_values must be non-empty")
    return [evaluate_cold_start(matrices, cfg, c, n_folds=n_folds, seed=seed)
            for c in c_values]
