import numpy as np
import pytest

from latmix.model import LatticeGeometry, MixtureParams, SpeciesParams


def pull(obs, truth, floor=1e-6):
    """Deviation in units of the observable's error bar.

    The absolute floor keeps the test well-posed for observables frozen by
    the physics (zero sampled variance, e.g. a locked particle number).
    """
    return abs(obs.mean - truth) / max(obs.err, floor)


@pytest.fixture
def chain2():
    return LatticeGeometry((2, 1, 1))


@pytest.fixture
def hardcore2(chain2):
    return MixtureParams(SpeciesParams("A", "hard-core", J=1.0, mu=0.3)), chain2


@pytest.fixture
def softcore2(chain2):
    sp = SpeciesParams("A", "soft-core", J=1.0, U=8.0, mu=3.0, n_max=5)
    return MixtureParams(sp), chain2


def rng_seeds(base, n):
    return [base + 1000 * k for k in range(n)]
