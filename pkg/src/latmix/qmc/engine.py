"""Worm-algorithm chain driver.

Builds the hot kernel from physics parameters, runs sweeps, accumulates
measurement streams, and assembles EstimatorResults.  The kernel backend is
the compiled extension when built, else the interpreted source; both execute
the identical statements so a chain's sample stream is backend-independent.
"""

from dataclasses import dataclass, replace

import numpy as np

from ..model.lattice import (HARD_CORE, SOFT_CORE, LatticeGeometry,
                             MixtureParams, site_potentials, trap_offsets)
from . import _kernel
from ._kernel import MOVE_NAMES, WormKernel
from .estimators import (EstimatorResult, Obs, binned_stats,
                         integrated_autocorrelation, jackknife_ratio)

BACKEND = "compiled" if _kernel.COMPILED else "pure-python"


@dataclass(frozen=True)
class ChainConfig:
    seed: int
    therm_sweeps: int = 500
    meas_sweeps: int = 2000
    sweeps_per_measure: int = 1
    n_bins: int = 32
    worm_weight: float = 1.0

    def __post_init__(self):
        if min(self.therm_sweeps, self.meas_sweeps, self.sweeps_per_measure) < 1:
            raise ValueError("all sweep counts must be positive")
        if self.n_bins < 2:
            raise ValueError("need at least 2 bins")


def _validate(system: MixtureParams):
    for k, sp in enumerate(system.species):
        if sp.statistics not in (SOFT_CORE, HARD_CORE):
            raise ValueError(
                f"QMC engine handles bosons only, species {sp.label} is "
                f"{sp.statistics} (hard-core bosons stand in for fermions)")
        if k == 1 and sp.statistics != HARD_CORE:
            raise ValueError("species B must be hard-core in the mixture engine")


class WormChain:
    """One Markov chain at fixed temperature (strictly sequential)."""

    def __init__(self, system: MixtureParams, geometry: LatticeGeometry,
                 temperature: float, seed: int, worm_weight: float = 1.0,
                 debug: bool = False):
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        _validate(system)
        self.system = system
        self.geometry = geometry
        self.temperature = temperature
        self.seed = seed
        self.debug = debug

        species = system.species
        n_species = len(species)
        n_sites = geometry.n_sites
        nbr, deg = geometry.neighbor_table()
        mu_site = np.stack([site_potentials(geometry, sp) for sp in species])
        self._trap = np.stack([trap_offsets(geometry, sp.trap_w) for sp in species])
        self._mu0 = np.array([sp.mu for sp in species])
        self._u = np.array([sp.U for sp in species])

        self.kernel = WormKernel(
            n_species, n_sites, 1.0 / temperature,
            np.array([sp.J for sp in species]),
            self._u,
            np.array([sp.n_max for sp in species], dtype=np.int64),
            mu_site,
            system.U_ab,
            nbr, deg,
            np.zeros((n_species, n_sites), dtype=np.int64),
            worm_weight, seed)

        self._out_n = np.zeros((n_species, n_sites))
        self._out_docc = np.zeros(n_sites)
        self._out_scalars = np.zeros(4)
        self._sweep_updates = 0  # 0 = adapt to current worldline size

    @property
    def beta(self):
        return 1.0 / self.temperature

    def sweep(self):
        """One sweep: a batch of elementary update attempts.

        While thermalizing the batch adapts to the instantaneous worldline
        size; before measuring it must be frozen (state-dependent measurement
        spacing biases the sampled ensemble), see freeze_sweep_size.
        """
        k = self.kernel
        n_att = self._sweep_updates
        if n_att == 0:
            n_att = 16 + self.geometry.n_sites * len(self.system.species) \
                + 2 * k.total_events()
        k.run_updates(n_att)
        if self.debug:
            k.check_invariants()

    def freeze_sweep_size(self, typical_events: float):
        """Pin the per-sweep attempt count (proportional to worldline size)."""
        self._sweep_updates = int(16 + self.geometry.n_sites
                                  * len(self.system.species)
                                  + 2 * round(typical_events))

    def measure_once(self):
        """Raw estimator sample of the current configuration (Z sector only).

        Returns None in the G sector.  Energies in J_A units.
        """
        k = self.kernel
        self._out_scalars[:] = 0.0
        if not k.measure(self._out_n, self._out_docc, self._out_scalars):
            return None
        beta = self.beta
        n = self._out_n
        docc = self._out_docc
        kinks_a, kinks_b, cross, multi = self._out_scalars

        kinetic = -(kinks_a + kinks_b) / beta
        e_u = self._u[0] * docc.sum()
        e_uab = self.system.U_ab * cross
        e_trap = float((self._trap * n).sum())
        n_tot = n.sum(axis=1)
        e_mu = float(self._mu0 @ n_tot)
        potential = e_u + e_uab + e_trap - e_mu
        energy = kinetic + e_u + e_uab + e_trap

        return {
            "energy": energy,
            "energy_grand": energy - e_mu,
            "kinetic": kinetic,
            "potential": potential,
            "interaction": e_u + e_uab,
            "n_total": n_tot.copy(),
            "docc_total": float(docc.sum()),
            "multi": float(multi),
            "density": n.copy(),
            "docc_grid": docc.copy(),
        }

    def run(self, chain: ChainConfig) -> EstimatorResult:
        """Thermalize, then measure.  Deterministic for a fixed seed."""
        acc = ChainAccumulator(self, chain)
        event_sum = 0
        for _ in range(chain.therm_sweeps):
            self.sweep()
            event_sum += self.kernel.total_events()
        self.freeze_sweep_size(event_sum / chain.therm_sweeps)
        n_meas_points = chain.meas_sweeps // chain.sweeps_per_measure
        for _ in range(n_meas_points):
            for _ in range(chain.sweeps_per_measure):
                self.sweep()
            acc.add(self.measure_once())
        return acc.finalize()


class ChainAccumulator:
    """Holds measurement streams; separable from the chain for checkpointing."""

    SCALAR_KEYS = ("energy", "energy_grand", "kinetic", "potential",
                   "interaction", "docc_total", "multi")

    def __init__(self, chain: WormChain, config: ChainConfig):
        self.chain = chain
        self.config = config
        self.n_species = len(chain.system.species)
        n_sites = chain.geometry.n_sites
        self.streams = {k: [] for k in self.SCALAR_KEYS}
        self.n_streams = [[] for _ in range(self.n_species)]
        self.density_sum = np.zeros((self.n_species, n_sites))
        self.density_sq = np.zeros((self.n_species, n_sites))
        self.docc_sum = np.zeros(n_sites)
        self.docc_sq = np.zeros(n_sites)
        self.n_meas = 0
        self.n_skipped = 0

    def add(self, sample):
        if sample is None:
            self.n_skipped += 1
            return
        for k in self.SCALAR_KEYS:
            self.streams[k].append(sample[k])
        for s in range(self.n_species):
            self.n_streams[s].append(sample["n_total"][s])
        self.density_sum += sample["density"]
        self.density_sq += sample["density"] ** 2
        self.docc_sum += sample["docc_grid"]
        self.docc_sq += sample["docc_grid"] ** 2
        self.n_meas += 1

    def state(self):
        return {
            "streams": {k: np.array(v) for k, v in self.streams.items()},
            "n_streams": [np.array(v) for v in self.n_streams],
            "density_sum": self.density_sum.copy(),
            "density_sq": self.density_sq.copy(),
            "docc_sum": self.docc_sum.copy(),
            "docc_sq": self.docc_sq.copy(),
            "n_meas": self.n_meas,
            "n_skipped": self.n_skipped,
        }

    def restore(self, state):
        self.streams = {k: list(v) for k, v in state["streams"].items()}
        self.n_streams = [list(v) for v in state["n_streams"]]
        self.density_sum = state["density_sum"].copy()
        self.density_sq = state["density_sq"].copy()
        self.docc_sum = state["docc_sum"].copy()
        self.docc_sq = state["docc_sq"].copy()
        self.n_meas = int(state["n_meas"])
        self.n_skipped = int(state["n_skipped"])

    def finalize(self) -> EstimatorResult:
        cfg = self.config
        n = max(self.n_meas, 1)
        bins_ok = self.n_meas >= cfg.n_bins and cfg.n_bins >= 16

        def obs(stream):
            arr = np.asarray(stream, dtype=float)
            m, e = binned_stats(arr, cfg.n_bins)
            return Obs(m, e, integrated_autocorrelation(arr))

        dens = self.density_sum / n
        # per-site naive errors inflated by the energy stream's autocorrelation;
        # keeping per-site streams would cost n_meas x n_sites memory
        var = np.maximum(self.density_sq / n - dens**2, 0.0)
        tau_e = integrated_autocorrelation(np.asarray(self.streams["energy"]))
        dens_err = np.sqrt(var / n * 2.0 * tau_e)
        doccg = self.docc_sum / n
        vard = np.maximum(self.docc_sq / n - doccg**2, 0.0)
        docc_err = np.sqrt(vard / n * 2.0 * tau_e)

        multi_mean, multi_err = jackknife_ratio(
            np.asarray(self.streams["multi"]),
            np.asarray(self.n_streams[0]), cfg.n_bins)

        proposed, accepted = self.chain.kernel.move_stats()
        move_stats = {name: (int(p), int(a)) for name, p, a
                      in zip(MOVE_NAMES, proposed, accepted)}

        return EstimatorResult(
            temperature=self.chain.temperature,
            n_measurements=self.n_meas,
            n_skipped=self.n_skipped,
            bins_ok=bins_ok,
            energy=obs(self.streams["energy"]),
            energy_grand=obs(self.streams["energy_grand"]),
            kinetic=obs(self.streams["kinetic"]),
            potential=obs(self.streams["potential"]),
            interaction=obs(self.streams["interaction"]),
            n_total=[obs(self.n_streams[s]) for s in range(self.n_species)],
            double_occupancy_total=obs(self.streams["docc_total"]),
            multi_fraction=Obs(multi_mean, multi_err),
            density=dens,
            density_err=dens_err,
            docc_grid=doccg,
            docc_grid_err=docc_err,
            seed=self.chain.seed,
            move_stats=move_stats,
            meta={"backend": BACKEND, "worm_weight": cfg.worm_weight,
                  "z_fraction": self.n_meas / max(self.n_meas + self.n_skipped, 1)},
        )


def run_chain(system: MixtureParams, geometry: LatticeGeometry,
              temperature: float, chain: ChainConfig,
              debug: bool = False) -> EstimatorResult:
    """Convenience one-shot: build a chain, thermalize, measure."""
    wc = WormChain(system, geometry, temperature, chain.seed,
                   worm_weight=chain.worm_weight, debug=debug)
    return wc.run(chain)
