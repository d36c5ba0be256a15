"""Lattice geometry and Hubbard parameters for one or two species.

All energies are in units of the species-A tunneling J_A unless stated
otherwise; site coordinates are integers centered on the trap minimum.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

SOFT_CORE = "soft-core"
HARD_CORE = "hard-core"
FERMION = "fermion"

_STATISTICS = (SOFT_CORE, HARD_CORE, FERMION)


@dataclass(frozen=True)
class LatticeGeometry:
    """Open-boundary cubic lattice, sites centered on the trap minimum."""

    shape: Tuple[int, int, int]
    spacing_nm: float = 532.0

    def __post_init__(self):
        if any(int(l) < 1 or int(l) != l for l in self.shape):
            raise ValueError(f"extents must be positive integers, got {self.shape}")
        if self.spacing_nm <= 0:
            raise ValueError("lattice spacing must be positive")

    @property
    def n_sites(self) -> int:
        lx, ly, lz = self.shape
        return lx * ly * lz

    def coordinates(self) -> np.ndarray:
        """(n_sites, 3) integer-valued site coordinates xi_i, trap-centered.

        Axis ordering is C order (x slowest), coordinates span
        [-(L-1)/2, (L-1)/2] so odd extents have a site exactly at the center.
        """
        axes = [np.arange(l) - (l - 1) / 2.0 for l in self.shape]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])

    def bonds(self) -> np.ndarray:
        """(n_bonds, 2) array of nearest-neighbor site-index pairs (open BC)."""
        lx, ly, lz = self.shape
        idx = np.arange(self.n_sites).reshape(self.shape)
        pairs = []
        for axis, l in enumerate(self.shape):
            if l < 2:
                continue
            a = np.take(idx, np.arange(l - 1), axis=axis).ravel()
            b = np.take(idx, np.arange(1, l), axis=axis).ravel()
            pairs.append(np.column_stack([a, b]))
        if not pairs:
            return np.empty((0, 2), dtype=np.int64)
        return np.concatenate(pairs).astype(np.int64)

    def neighbor_table(self) -> Tuple[np.ndarray, np.ndarray]:
        """(nbr, degree): nbr[i, :degree[i]] lists neighbors of site i."""
        n = self.n_sites
        deg = np.zeros(n, dtype=np.int64)
        nbr = -np.ones((n, 6), dtype=np.int64)
        for a, b in self.bonds():
            nbr[a, deg[a]] = b
            deg[a] += 1
            nbr[b, deg[b]] = a
            deg[b] += 1
        return nbr, deg


@dataclass(frozen=True)
class SpeciesParams:
    """Hubbard parameters of one species, energies in J_A units."""

    label: str
    statistics: str
    J: float = 1.0
    U: float = 0.0
    mu: float = 0.0
    trap_w: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    n_max: int = 5

    def __post_init__(self):
        if self.statistics not in _STATISTICS:
            raise ValueError(f"unknown statistics {self.statistics!r}")
        if self.J <= 0:
            raise ValueError("tunneling J must be positive")
        if any(w < 0 for w in self.trap_w):
            raise ValueError("trap curvatures must be nonnegative")
        if self.statistics == SOFT_CORE:
            if self.U < 0:
                raise ValueError("soft-core on-site interaction must be >= 0")
            if self.n_max < 3:
                raise ValueError("soft-core occupation cutoff n_max must be >= 3")
        else:
            # U is meaningless for hard-core/fermion statistics
            object.__setattr__(self, "U", 0.0)
            object.__setattr__(self, "n_max", 1)

    def with_mu(self, mu: float) -> "SpeciesParams":
        return SpeciesParams(self.label, self.statistics, self.J, self.U, mu,
                             self.trap_w, self.n_max)


@dataclass(frozen=True)
class MixtureParams:
    """One or two species plus the interspecies on-site interaction."""

    species_a: SpeciesParams
    species_b: Optional[SpeciesParams] = None
    U_ab: float = 0.0

    def __post_init__(self):
        if self.species_b is None and self.U_ab != 0.0:
            raise ValueError("U_ab must be 0 for single-species systems")

    @property
    def species(self) -> Tuple[SpeciesParams, ...]:
        if self.species_b is None:
            return (self.species_a,)
        return (self.species_a, self.species_b)

    def with_mu(self, mu_a: float, mu_b: Optional[float] = None) -> "MixtureParams":
        b = self.species_b
        if b is not None and mu_b is not None:
            b = b.with_mu(mu_b)
        return MixtureParams(self.species_a.with_mu(mu_a), b, self.U_ab)


def trap_offsets(geometry: LatticeGeometry, trap_w) -> np.ndarray:
    """Per-site harmonic offset sum_xi w_xi xi_i^2 (>= 0, zero at the center)."""
    coords = geometry.coordinates()
    w = np.asarray(trap_w, dtype=float)
    return coords**2 @ w


def site_potentials(geometry: LatticeGeometry, species: SpeciesParams) -> np.ndarray:
    """Local chemical potential mu_i = mu - sum_xi w_xi xi_i^2 per site."""
    return species.mu - trap_offsets(geometry, species.trap_w)
