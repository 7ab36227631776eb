import numpy as np
import pytest

from dpcert.training import Dataset


def two_gaussians(n=200, n_test=60, spread=0.6, sep=2.0, seed=11):
    """Separable 2-d two-class mixture used across trainer/pipeline tests."""
    rng = np.random.default_rng(seed)
    half, t_half = n // 2, n_test // 2
    X = np.vstack([rng.normal([-sep, 0.0], spread, (half, 2)),
                   rng.normal([sep, 0.0], spread, (half, 2))])
    y = np.r_[np.zeros(half, dtype=int), np.ones(half, dtype=int)]
    Xt = np.vstack([rng.normal([-sep, 0.0], spread, (t_half, 2)),
                    rng.normal([sep, 0.0], spread, (t_half, 2))])
    yt = np.r_[np.zeros(t_half, dtype=int), np.ones(t_half, dtype=int)]
    return Dataset(X, y, 2), Dataset(Xt, yt, 2)


@pytest.fixture
def desk_data():
    return two_gaussians()
