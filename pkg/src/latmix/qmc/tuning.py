"""Chemical-potential tuning: invert <N>(mu) with short pilot chains.

Grand-canonical compressibility is nonnegative, so <N>(mu) is monotone
nondecreasing and bracketing plus bisection is robust even with pilot noise.
"""

from dataclasses import dataclass
from typing import Optional

from ..model.lattice import LatticeGeometry, MixtureParams
from .engine import ChainConfig, run_chain


class TuningError(RuntimeError):
    def __init__(self, msg, best_mu=None, best_n=None):
        super().__init__(msg)
        self.best_mu = best_mu
        self.best_n = best_n


@dataclass
class TuneResult:
    mu: float
    n_mean: float
    n_err: float
    iterations: int
    converged: bool


def _pilot_n(system, geometry, temperature, species_idx, chain, seed_offset):
    cfg = ChainConfig(seed=chain.seed + seed_offset,
                      therm_sweeps=chain.therm_sweeps,
                      meas_sweeps=chain.meas_sweeps,
                      sweeps_per_measure=chain.sweeps_per_measure,
                      n_bins=max(8, chain.n_bins // 2),
                      worm_weight=chain.worm_weight)
    res = run_chain(system, geometry, temperature, cfg)
    obs = res.n_total[species_idx]
    return obs.mean, obs.err


def tune_mu(system: MixtureParams, geometry: LatticeGeometry, temperature: float,
            target_n: float, tol_rel: float = 0.01,
            species: str = "A", pilot: Optional[ChainConfig] = None,
            mu_lo: Optional[float] = None, mu_hi: Optional[float] = None,
            max_expand: int = 12, max_iter: int = 40) -> TuneResult:
    """Bisection on <N_species>(mu) until |<N> - target| <= tol_rel * target.

    Other species' parameters are held fixed.  Pilot runs are short; the
    returned mu should be validated by the production run.
    """
    if target_n <= 0:
        raise ValueError("target particle number must be positive")
    if tol_rel < 0.005:
        raise ValueError("tol_rel below 0.005 is not resolvable by pilots")
    idx = 0 if species.upper() == "A" else 1
    if idx == 1 and system.species_b is None:
        raise ValueError("no species B in this system")
    if pilot is None:
        pilot = ChainConfig(seed=1000, therm_sweeps=300, meas_sweeps=1200,
                            n_bins=16)

    sp = system.species[idx]
    scale = max(abs(sp.U), 4.0 * sp.J, abs(system.U_ab), temperature)
    lo = sp.mu - scale if mu_lo is None else mu_lo
    hi = sp.mu + scale if mu_hi is None else mu_hi

    def with_mu(mu):
        if idx == 0:
            return system.with_mu(mu)
        return system.with_mu(system.species_a.mu, mu)

    evals = {}

    def n_of(mu, k):
        if mu not in evals:
            evals[mu] = _pilot_n(with_mu(mu), geometry, temperature, idx,
                                 pilot, seed_offset=17 * k)
        return evals[mu]

    tol = tol_rel * target_n
    n_lo, _ = n_of(lo, 0)
    n_hi, _ = n_of(hi, 1)
    k = 2
    for _ in range(max_expand):
        if n_lo <= target_n:
            break
        lo -= scale
        n_lo, _ = n_of(lo, k)
        k += 1
    for _ in range(max_expand):
        if n_hi >= target_n:
            break
        hi += scale
        n_hi, _ = n_of(hi, k)
        k += 1
    if n_lo > target_n or n_hi < target_n:
        raise TuningError(
            f"could not bracket target N={target_n} in mu range "
            f"[{lo:.3f}, {hi:.3f}] (N range [{n_lo:.3f}, {n_hi:.3f}])",
            best_mu=(lo if abs(n_lo - target_n) < abs(n_hi - target_n) else hi),
            best_n=min(n_lo, n_hi, key=lambda n: abs(n - target_n)))

    best = (float("inf"), None, None, None)
    mu, n_mu, e_mu = lo, n_lo, 0.0
    for it in range(max_iter):
        mu = 0.5 * (lo + hi)
        n_mu, e_mu = n_of(mu, k)
        k += 1
        miss = abs(n_mu - target_n)
        if miss < best[0]:
            best = (miss, mu, n_mu, e_mu)
        if miss <= tol:
            return TuneResult(mu, n_mu, e_mu, it + 1, True)
        if n_mu < target_n:
            lo = mu
        else:
            hi = mu
        if hi - lo < 1e-10 * max(1.0, abs(hi)):
            break
    miss, mu_b, n_b, e_b = best
    if miss <= tol:
        return TuneResult(mu_b, n_b, e_b, max_iter, True)
    return TuneResult(mu_b, n_b, e_b if e_b is not None else float("inf"),
                      max_iter, False)
