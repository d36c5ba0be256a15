"""Single-site exactness: the sampled occupation distribution must match the
analytic grand-canonical law (detailed-balance audit of open/close/move)."""

import numpy as np
import pytest
from scipy.stats import chisquare

from latmix.model import LatticeGeometry, MixtureParams, SpeciesParams
from latmix.oracle import atomic_limit
from latmix.qmc import WormChain


def sample_occupations(species, temperature, seed, n_samples=40000, spacing=25):
    g = LatticeGeometry((1, 1, 1))
    wc = WormChain(MixtureParams(species), g, temperature, seed=seed)
    counts = np.zeros(species.n_max + 1)
    for _ in range(n_samples):
        wc.kernel.run_updates(spacing)
        s = wc.measure_once()
        if s is not None:
            counts[int(round(s["density"][0, 0]))] += 1
    return counts


@pytest.mark.parametrize("stats,u,mu,nmax,seed", [
    ("soft-core", 2.0, 1.0, 5, 901),
    ("soft-core", 0.0, -0.5, 5, 902),
    ("hard-core", 0.0, 0.7, 1, 903),
])
def test_occupation_distribution_chisquared(stats, u, mu, nmax, seed):
    sp = SpeciesParams("A", stats, J=1.0, U=u, mu=mu, n_max=nmax)
    counts = sample_occupations(sp, 1.0, seed)
    probs = atomic_limit(u, np.array([mu]), 1.0, n_max=nmax).occupation_probs[0]
    # merge tail bins with tiny expectation so the chi-squared is valid
    expected = counts.sum() * probs
    keep = expected >= 5
    c = np.append(counts[keep], counts[~keep].sum())
    e = np.append(expected[keep], expected[~keep].sum())
    if e[-1] == 0:
        c, e = c[:-1], e[:-1]
    _, p = chisquare(c, e * c.sum() / e.sum())
    assert p > 0.01, f"chi-squared p = {p}"


def test_single_site_energy_vs_atomic():
    from latmix.qmc import ChainConfig, run_chain

    g = LatticeGeometry((1, 1, 1))
    sp = SpeciesParams("A", "soft-core", J=1.0, U=2.0, mu=1.0, n_max=5)
    res = run_chain(MixtureParams(sp), g, 1.0,
                    ChainConfig(seed=77, therm_sweeps=2000, meas_sweeps=40000,
                                n_bins=32))
    oracle = atomic_limit(2.0, np.array([1.0]), 1.0, n_max=5)
    assert abs(res.n_total[0].mean - oracle.density[0]) < 3.5 * res.n_total[0].err
    assert abs(res.double_occupancy_total.mean
               - oracle.double_occupancy[0]) < 3.5 * res.double_occupancy_total.err
    # a single site has no bonds: kinetic energy is exactly zero
    assert res.kinetic.mean == 0.0
