import numpy as np
import pytest

from homogmc.field import correlation_model, make_field


@pytest.fixture(scope="session")
def square_field():
    return make_field("square", seed=314)


@pytest.fixture(scope="session")
def square_corr(square_field):
    return correlation_model(square_field)


@pytest.fixture(scope="session")
def smooth_field():
    return make_field("c2t", seed=2718)


@pytest.fixture(scope="session")
def smooth_corr(smooth_field):
    return correlation_model(smooth_field)


def mc_stderr(samples: np.ndarray) -> float:
    samples = np.asarray(samples, dtype=float)
    return float(samples.std(ddof=1) / np.sqrt(len(samples)))
