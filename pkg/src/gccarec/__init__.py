"""Cross-domain cold-start rating prediction.

Per-domain matrix factorization is alternated with generalized
canonical correlation analysis over user latent factors, so users with
few or no ratings in a target domain inherit factors transferred from
domains where they are active.
"""

from .data import (RatingsMatrix, UserAlignment, FoldSplit, ColdStartFold,
                   DataError, ingest_movielens, ingest_amazon,
                   filter_min_ratings, restrict_common_users, align_users,
                   split_folds, make_cold_start, cold_start_user_folds)
from .gcca import (ViewMatrix, CcaModel, GccaModel, FastConfig, GccaError,
                   MemoryBudgetError, make_view, fit_cca, fit_gcca,
                   fit_fast_gcca_issm, reconstruct_view, constraint_residual)
from .mf import (TrainConfig, FactorModel, MfError, fit_mf, predict,
                 offset_baseline, pca_user_features)
from .pipeline import (PipelineConfig, CrossDomainModel, EvalReport,
                       PipelineError, train_cross_domain, predict_target,
                       evaluate_cold_start, sweep_cold_start)
from .simulation import SimConfig, SimResult, generate_synthetic, run_trial, sweep
from .synthetic import (SurrogateConfig, make_rating_domains, make_reviews,
                        write_movielens, write_amazon)
from .topics import (ReviewCorpus, TopicModel, TopicsError, build_corpus,
                     fit_lda, user_topic_view)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
