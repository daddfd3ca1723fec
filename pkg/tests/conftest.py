import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mwlab.kernels import available_backends

settings.register_profile(
    "mwlab", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("mwlab")


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_pd(rng, d, spread=1.0):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = spread * 0.5 * (g + g.conj().T) / np.sqrt(2.0)
    lam, vec = np.linalg.eigh(h)
    return (vec * np.exp(lam)) @ vec.conj().T
