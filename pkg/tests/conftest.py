import numpy as np
import pytest

from gccarec.mf import TrainConfig
from gccarec.pipeline import PipelineConfig
from gccarec.synthetic import SurrogateConfig, make_rating_domains


@pytest.fixture(scope="session")
def surrogate():
    """Two-domain surrogate ratings with a planted shared structure."""
    return make_rating_domains(SurrogateConfig(seed=42))


@pytest.fixture(scope="session")
def surrogate3():
    """Three-domain surrogate for multi-auxiliary runs."""
    return make_rating_domains(SurrogateConfig(
        seed=42, domains=("music", "movies", "books")))


def quick_config(target="music", auxiliaries=("movies",), variant="issm",
                 **kwargs):
    """Small but effective pipeline settings for surrogate-scale data."""
    defaults = dict(
        target=target, auxiliaries=list(auxiliaries), k_mf=16, k_gcca=24,
        variant=variant, max_iterations=6, tol=0.0,
        mf_config=TrainConfig(learning_rate=0.02, epochs=30, seed=7), seed=1)
    defaults.update(kwargs)
    return PipelineConfig(**defaults)


def random_views(seed, L=120, widths=(10, 8, 12), s=0.0):
    """Row-aligned random Gaussian views with optional missing rows."""
    from gccarec.gcca import make_view

    rng = np.random.default_rng(seed)
    views = []
    presence = np.ones((len(widths), L), dtype=bool)
    if s > 0:
        for d in range(len(widths)):
            presence[d, rng.choice(L, int(s * L), replace=False)] = False
        uncovered = np.flatnonzero(presence.sum(axis=0) == 0)
        presence[0, uncovered] = True
    for d, w in enumerate(widths):
        X = rng.standard_normal((L, w))
        X[~presence[d]] = 0.0
        views.append(make_view(X, presence[d], domain=f"v{d}"))
    return views
