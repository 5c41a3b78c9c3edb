import numpy as np
import pytest

from phasecd.core import MeasurementEnsemble


def random_ensemble(rng, N, M, noise=0.0, consistent=True):
    """Gaussian instance with its planted signal; ``noise`` is an absolute std."""
    a = (rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))) / np.sqrt(2)
    x = (rng.standard_normal(N) + 1j * rng.standard_normal(N)) / np.sqrt(2)
    b = np.abs(np.conj(a) @ x) ** 2 if consistent else rng.exponential(size=M)
    if noise:
        b = b + noise * rng.standard_normal(M)
    return MeasurementEnsemble(a, b), x


@pytest.fixture
def rng():
    return np.random.default_rng(20241017)


@pytest.fixture
def make_ensemble():
    return random_ensemble
