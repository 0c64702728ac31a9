import numpy as np
import pytest

from anisomp import Population, PopulationModel, PopulationSpectrum


@pytest.fixture
def null_pop_half():
    """Sigma = I at aspect ratio 1/2."""
    return PopulationSpectrum.identity(8, 0.5)


@pytest.fixture
def null_population_half():
    return Population(PopulationModel.identity(8), 16)


def unit(n, k=0):
    v = np.zeros(n)
    v[k] = 1.0
    return v


def random_unit(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)
