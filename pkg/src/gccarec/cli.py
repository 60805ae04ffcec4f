"""Command-line entry point for reproducible runs.

Subcommands: simulate, ingest, train, evaluate, report. Runs are driven
by an INI config file; every run writes a resolved copy of its config
and the root seed next to its outputs so it can be reproduced exactly.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import data, pipeline, simulation
from .mf import TrainConfig

_SECTIONS = {
    "simulate": {"preset", "n", "s", "l", "m", "sigma", "k", "reps"},
    "data": {"source", "ratings", "movies", "genres", "categories",
             "csv_dir", "min_ratings", "common_users"},
    "pipeline": {"target", "auxiliaries", "k_mf", "k_gcca", "variant",
                 "max_iterations", "tol", "warm_epochs", "fast_m", "fast_r",
                 "memory_budget"},
    "mf": {"learning_rate", "lr_decay", "lambda", "epochs", "init_sigma",
           "clamp"},
    "evaluate": {"c", "n_folds"},
    "report": {"inputs"},
}


class CliError(ValueError):
    pass


def load_config(path):
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise CliError(f"cannot read config file {path}")
    for section in parser.sections():
        if section not in _SECTIONS:
            raise CliError(f"unknown config section [{section}]")
        unknown = set(parser[section]) - _SECTIONS[section]
        if unknown:
            raise CliError(
                f"unknown keys in [{section}]: {sorted(unknown)}")
    return parser


def _ints(text):
    return [int(v) for v in text.split()]


def _floats(text):
    return [float(v) for v in text.split()]


def write_resolved(config, seed, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    resolved = configparser.ConfigParser()
    resolved.read_dict({s: dict(config[s]) for s in config.sections()})
    if not resolved.has_section("run"):
        resolved.add_section("run")
    resolved.set("run", "seed", str(seed))
    with open(os.path.join(out_dir, "config.resolved.ini"), "w") as fh:
        resolved.write(fh)


def cmd_simulate(config, seed, out_dir, jobs):
    section = config["simulate"] if config.has_section("simulate") else {}
    preset = section.get("preset", "")
    if preset == "fig2":
        n_values, L_values = [4, 8], [500]
        s_values = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5]
    elif preset == "fig3":
        n_values, s_values = [2], [0.4]
        L_values = [500, 1000, 1500, 2000, 2500]
    elif preset:
        raise CliError(f"unknown simulate preset {preset!r}")
    else:
        n_values = _ints(section.get("n", ""))
        s_values = _floats(section.get("s", ""))
        L_values = _ints(section.get("l", ""))
        if not (n_values and s_values and L_values):
            raise CliError("simulate needs n, s, and l grids (or a preset)")
    M = int(section.get("m", 10))
    sigma = float(section.get("sigma", 0.1))
    k = int(section.get("k", M))
    reps = int(section.get("reps", 100))
    rows = simulation.sweep(n_values, s_values, L_values, reps, M=M,
                            sigma=sigma, k=k, root_seed=seed)
    write_resolved(config, seed, out_dir)
    simulation.write_sweep_csv(rows, os.path.join(out_dir, "sweep.csv"))
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        for row in rows:
            fh.write(
                "n={n} s={s} L={L}: missing-row MSE standard="
                "{mse_missing_gcca:.4f} issm={mse_missing_issm:.4f} "
                "improvement={improvement_mean:.1%}\n".format(**row))
    print(f"wrote {len(rows)} sweep rows to {out_dir}")
    return 0


def load_domains(config):
    if not config.has_section("data"):
        raise CliError("config needs a [data] section")
    section = config["data"]
    source = section.get("source", "csv")
    if source == "movielens":
        genres = section.get("genres", "").split()
        if not genres:
            raise CliError("movielens source needs a genres list")
        matrices = data.ingest_movielens(section["ratings"],
                                         section["movies"], genres)
    elif source == "amazon":
        paths = dict(item.split("=", 1)
                     for item in section.get("categories", "").split())
        if not paths:
            raise CliError("amazon source needs category=path pairs")
        for path in paths.values():
            if not os.path.exists(path):
                raise CliError(f"missing dataset file {path}")
        matrices, _, _ = data.ingest_amazon(paths)
    elif source == "csv":
        csv_dir = section.get("csv_dir", "")
        if not os.path.isdir(csv_dir):
            raise CliError(f"missing dataset directory {csv_dir!r}")
        matrices = {}
        for name in sorted(os.listdir(csv_dir)):
            if name.endswith(".manifest.json"):
                stem = name[:-len(".manifest.json")]
                m = data.load_matrix_csv(os.path.join(csv_dir, f"{stem}.csv"),
                                         os.path.join(csv_dir, name))
                matrices[m.domain] = m
    else:
        raise CliError(f"unknown data source {source!r}")
    min_ratings = section.getint("min_ratings", fallback=0)
    if min_ratings > 1:
        matrices = {name: data.filter_min_ratings(m, min_ratings)
                    for name, m in matrices.items()}
    if section.getboolean("common_users", fallback=False):
        matrices = data.restrict_common_users(matrices)
    return matrices


def build_pipeline_config(config, seed):
    if not config.has_section("pipeline"):
        raise CliError("config needs a [pipeline] section")
    section = config["pipeline"]
    mf_kwargs = {}
    if config.has_section("mf"):
        mf = config["mf"]
        if "learning_rate" in mf:
            mf_kwargs["learning_rate"] = mf.getfloat("learning_rate")
        if "lr_decay" in mf:
            mf_kwargs["lr_decay"] = mf.getfloat("lr_decay")
        if "lambda" in mf:
            mf_kwargs["lam"] = mf.getfloat("lambda")
        if "epochs" in mf:
            mf_kwargs["epochs"] = mf.getint("epochs")
        if "init_sigma" in mf:
            mf_kwargs["init_sigma"] = mf.getfloat("init_sigma")
        if "clamp" in mf:
            lo, hi = _floats(mf["clamp"])
            mf_kwargs["clamp"] = (lo, hi)
    mf_config = TrainConfig(seed=seed, **mf_kwargs)
    auxiliaries = section.get("auxiliaries", "").split()
    kwargs = dict(
        target=section.get("target", ""), auxiliaries=auxiliaries,
        k_mf=section.getint("k_mf", fallback=50),
        k_gcca=section.getint("k_gcca", fallback=75),
        variant=section.get("variant", "issm"),
        max_iterations=section.getint("max_iterations", fallback=20),
        tol=section.getfloat("tol", fallback=1e-4),
        warm_epochs=section.getint("warm_epochs", fallback=10),
        mf_config=mf_config, seed=seed)
    if section.get("fast_m", ""):
        kwargs["fast_m"] = section.getint("fast_m")
    if section.get("fast_r", ""):
        kwargs["fast_r"] = section.getfloat("fast_r")
    if section.get("memory_budget", ""):
        kwargs["memory_budget"] = section.getint("memory_budget")
    try:
        return pipeline.PipelineConfig(**kwargs)
    except pipeline.PipelineError as exc:
        raise CliError(str(exc)) from None


def cmd_ingest(config, seed, out_dir, jobs):
    matrices = load_domains(config)
    write_resolved(config, seed, out_dir)
    data.save_domains(matrices, out_dir)
    for name, m in sorted(matrices.items()):
        print(f"{name}: {m.n_users} users, {m.n_items} items, "
              f"{m.n_ratings} ratings")
    return 0


def cmd_train(config, seed, out_dir, jobs):
    matrices = load_domains(config)
    cfg = build_pipeline_config(config, seed)
    c = _ints(config["evaluate"].get("c", "0"))[0] \
        if config.has_section("evaluate") else 0
    n_folds = config["evaluate"].getint("n_folds", fallback=5) \
        if config.has_section("evaluate") else 5
    fold = data.cold_start_user_folds(matrices, cfg.target, n_folds, c,
                                      seed)[0]
    model = pipeline.train_cross_domain(matrices, fold, cfg)
    write_resolved(config, seed, out_dir)
    np.savez(os.path.join(out_dir, "model.npz"),
             G=model.gcca.G, target_factors=model.target_factors,
             target_items=model.target_items, mu_t=model.mu_t,
             eigenvalues=model.gcca.eigenvalues, variant=model.gcca.variant,
             iteration_trace=np.array(model.iteration_trace),
             best_iteration=model.best_iteration)
    print(f"trained {cfg.variant} model: best iteration "
          f"{model.best_iteration}, validation MSE "
          f"{min(model.iteration_trace):.4f}")
    return 0


def _evaluate_cell(args):
    matrices, cfg, c, n_folds, seed = args
    return pipeline.evaluate_cold_start(matrices, cfg, c, n_folds=n_folds,
                                        seed=seed)


def cmd_evaluate(config, seed, out_dir, jobs):
    matrices = load_domains(config)
    cfg = build_pipeline_config(config, seed)
    section = config["evaluate"] if config.has_section("evaluate") else {}
    c_values = _ints(section.get("c", "0"))
    n_folds = int(section.get("n_folds", 5))
    cells = [(matrices, cfg, c, n_folds, seed) for c in c_values]
    reports, failures = [], []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_evaluate_cell, cell) for cell in cells]
            for cell, future in zip(cells, futures):
                try:
                    reports.append(future.result())
                except Exception as exc:
                    failures.append((cell[2], str(exc)))
                    print(f"c={cell[2]} failed: {exc}", file=sys.stderr)
    else:
        for cell in cells:
            try:
                reports.append(_evaluate_cell(cell))
            except Exception as exc:
                failures.append((cell[2], str(exc)))
                print(f"c={cell[2]} failed: {exc}", file=sys.stderr)
    write_resolved(config, seed, out_dir)
    pipeline.write_report_csv(reports, os.path.join(out_dir, "report.csv"))
    pipeline.write_report_json(reports, os.path.join(out_dir, "report.json"))
    if failures:
        with open(os.path.join(out_dir, "failures.json"), "w") as fh:
            json.dump([{"c": c, "error": e} for c, e in failures], fh)
    for report in reports:
        print(f"c={report.c}: offset={report.mean_mse['offset']:.4f} "
              f"mf={report.mean_mse['mf']:.4f} "
              f"method={report.mean_mse['method']:.4f} "
              f"improvement={report.improvement():.1%}")
    return 1 if failures else 0


def cmd_report(config, seed, out_dir, jobs, inputs=()):
    """Aggregate report.json files into one summary table."""
    paths = list(inputs)
    if config is not None and config.has_section("report"):
        paths.extend(config["report"].get("inputs", "").split())
    if not paths:
        raise CliError("report needs input report.json paths")
    summaries = []
    for path in paths:
        with open(path) as fh:
            summaries.extend(json.load(fh))
    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, "aggregate.json")
    with open(out_path, "w") as fh:
        json.dump(summaries, fh, indent=2, sort_keys=True)
    for s in summaries:
        aux = "+".join(s["auxiliaries"])
        print(f"{s['target']} <- {aux} (c={s['c']}, {s['variant']}): "
              + " ".join(f"{m}={v:.4f}" for m, v in
                         sorted(s["mean_mse"].items())))
    print(f"wrote {out_path}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="gccarec",
        description="Cross-domain cold-start rating prediction runs")
    parser.add_argument("command",
                        choices=["simulate", "ingest", "train", "evaluate",
                                 "report"])
    parser.add_argument("--config", help="INI config file path")
    parser.add_argument("--seed", type=int, default=0, help="root seed")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker pool size for evaluation cells")
    parser.add_argument("inputs", nargs="*",
                        help="report.json inputs (report command)")
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            config = load_config(args.config) if args.config else None
            return cmd_report(config, args.seed, args.out, args.jobs,
                              inputs=args.inputs)
        if not args.config:
            raise CliError(f"{args.command} requires --config")
        config = load_config(args.config)
        handler = {"simulate": cmd_simulate, "ingest": cmd_ingest,
                   "train": cmd_train, "evaluate": cmd_evaluate}[args.command]
        return handler(config, args.seed, args.out, args.jobs)
    except (CliError, data.DataError, pipeline.PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
