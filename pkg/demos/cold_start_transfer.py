"""Cross-domain transfer for brand-new users.

Generates two rating domains whose users share taste structure, hides
all target-domain training ratings for a cohort of test users, and
compares three predictors on those users' held-out ratings:

  offset  global-mean prediction, the floor for a user we know nothing
          about in the target domain
  mf      single-domain matrix factorization of the censored target
          matrix (collapses to offset for users with zero ratings)
  method  alternating MF + shared-space projection, which carries each
          cold user's auxiliary-domain factors into the target domain

Run: python demos/cold_start_transfer.py [--seed 42]
"""

import argparse

from gccarec.mf import TrainConfig
from gccarec.pipeline import PipelineConfig, sweep_cold_start
from gccarec.synthetic import SurrogateConfig, make_rating_domains


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=42, help="data seed")
    ap.add_argument("--folds", type=int, default=3,
                    help="cross-validation folds")
    args = ap.parse_args()

    matrices, _ = make_rating_domains(SurrogateConfig(seed=args.seed))
    for name, m in matrices.items():
        print(f"{name}: {m.n_users} users, {m.n_items} items, "
              f"{m.n_ratings} ratings")

    cfg = PipelineConfig(
        target="music", auxiliaries=["movies"], k_mf=16, k_gcca=24,
        variant="issm", max_iterations=6, tol=0.0,
        mf_config=TrainConfig(learning_rate=0.02, epochs=30, seed=7),
        seed=1)

    # c caps how many target-domain training ratings a test user keeps;
    # c=0 is a user the target domain has never seen
    c_values = [0, 5, 10, 25]
    reports = sweep_cold_start(matrices, cfg, c_values,
                               n_folds=args.folds, seed=1)
    print()
    print(f"{'c':>4} {'offset':>8} {'mf':>8} {'method':>8} {'gain':>7}")
    for r in reports:
        print(f"{r.c:>4} {r.mean_mse['offset']:>8.4f} "
              f"{r.mean_mse['mf']:>8.4f} {r.mean_mse['method']:>8.4f} "
              f"{r.improvement():>6.1%}")
    print()
    print("At c=0 mf equals offset (no target ratings to factorize), "
          "while the transfer method already personalizes; as c grows "
          "the single-domain mf catches up and the gap narrows.")


if __name__ == "__main__":
    main()
