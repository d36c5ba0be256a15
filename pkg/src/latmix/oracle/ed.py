"""Finite-temperature exact diagonalization of small Bose-Hubbard systems.

Dense diagonalization of the full many-body Hamiltonian (one or two species,
soft-core occupations truncated at n_max), thermal traces from the complete
spectrum.  Brute-force reference for the QMC engine; feasibility is enforced
by a hard Hilbert-dimension cap.
"""

from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from ..model.lattice import (LatticeGeometry, MixtureParams, SpeciesParams,
                             site_potentials, trap_offsets)

DIMENSION_CAP = 20_000


class DimensionError(ValueError):
    """Hilbert dimension exceeds what dense thermal ED can handle."""


@dataclass(frozen=True)
class EDResult:
    log_z: float
    energy: float  # physical energy: kinetic + interactions + trap
    energy_grand: float  # energy minus mu N (grand-canonical H expectation)
    entropy: float
    n_total: np.ndarray  # per-species <N>
    density: np.ndarray  # (n_species, n_sites)
    double_occupancy: np.ndarray  # per-site <n_A (n_A - 1)> / 2
    multi_fraction: float  # fraction of A atoms on sites with n_A >= 2
    kinetic: float
    interaction: float  # U and U_AB terms together


def _species_states(n_sites: int, n_max: int, fixed_n: Optional[int]):
    states = []
    for occ in product(range(n_max + 1), repeat=n_sites):
        if fixed_n is None or sum(occ) == fixed_n:
            states.append(occ)
    return states


def _hop_matrix(states, index, bonds, n_max):
    """Dense hopping matrix sum_<ij> (a_i^dag a_j + h.c.) for one species."""
    dim = len(states)
    h = np.zeros((dim, dim))
    for s_idx, occ in enumerate(states):
        for i, j in bonds:
            # a_i^dag a_j
            if occ[j] >= 1 and occ[i] < n_max:
                new = list(occ)
                new[j] -= 1
                new[i] += 1
                t_idx = index[tuple(new)]
                amp = np.sqrt(occ[j] * (occ[i] + 1))
                h[t_idx, s_idx] += amp
                h[s_idx, t_idx] += amp
    return h


def hilbert_dimension(system: MixtureParams, geometry: LatticeGeometry,
                      fixed_n=None) -> int:
    from math import comb

    dims = []
    for k, sp in enumerate(system.species):
        n_sites = geometry.n_sites
        if fixed_n is not None and fixed_n[k] is not None:
            n = fixed_n[k]
            if sp.n_max >= n:
                dims.append(comb(n + n_sites - 1, n_sites - 1))
            else:
                dims.append(len(_species_states(n_sites, sp.n_max, n)))
        else:
            dims.append((sp.n_max + 1) ** n_sites)
    out = 1
    for d in dims:
        out *= d
    return out


def ed_thermal(system: MixtureParams, geometry: LatticeGeometry, temperature: float,
               fixed_n=None) -> EDResult:
    """Thermal observables from the full spectrum.

    fixed_n: None for grand-canonical (mu from the species params enters H);
    otherwise a per-species tuple of particle numbers (canonical ensemble;
    mu is then excluded from H and energy_grand equals energy).
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    dim = hilbert_dimension(system, geometry, fixed_n)
    if dim > DIMENSION_CAP:
        raise DimensionError(f"Hilbert dimension {dim} exceeds cap {DIMENSION_CAP}")

    n_sites = geometry.n_sites
    bonds = geometry.bonds()
    species = system.species
    grand = fixed_n is None

    state_sets = []
    for k, sp in enumerate(species):
        fn = None if grand else fixed_n[k]
        state_sets.append(_species_states(n_sites, sp.n_max, fn))

    # occupation arrays per species: (dim_k, n_sites)
    occs = [np.array(states, dtype=float) for states in state_sets]
    dims = [len(s) for s in state_sets]

    hops = []
    for k, sp in enumerate(species):
        index = {occ: i for i, occ in enumerate(state_sets[k])}
        hops.append(_hop_matrix(state_sets[k], index, bonds, sp.n_max))

    # diagonal pieces per species
    diag_int = []  # on-site U
    diag_trap = []  # trap offsets
    diag_mu0 = []  # homogeneous mu * N  (grand-canonical only)
    for k, sp in enumerate(species):
        occ = occs[k]
        diag_int.append(0.5 * sp.U * (occ * (occ - 1.0)).sum(axis=1))
        diag_trap.append(occ @ trap_offsets(geometry, sp.trap_w))
        diag_mu0.append(sp.mu * occ.sum(axis=1))

    if len(species) == 1:
        h = -species[0].J * hops[0]
        h += np.diag(diag_int[0] + diag_trap[0] - (diag_mu0[0] if grand else 0.0))
        occ_full = [occs[0]]
        docc_full = 0.5 * (occs[0] * (occs[0] - 1.0))
        multi_full = occs[0] * (occs[0] >= 2)
        kin_ops = [-species[0].J * hops[0]]
        int_diag = diag_int[0]
    else:
        da, db = dims
        eye_a, eye_b = np.eye(da), np.eye(db)
        ha = -species[0].J * hops[0]
        hb = -species[1].J * hops[1]
        kin_a = np.kron(ha, eye_b)
        kin_b = np.kron(eye_a, hb)
        h = kin_a + kin_b
        cross = system.U_ab * (occs[0][:, None, :] * occs[1][None, :, :]).sum(axis=2)
        diag = (diag_int[0][:, None] + diag_trap[0][:, None]
                + diag_int[1][None, :] + diag_trap[1][None, :] + cross)
        if grand:
            diag = diag - diag_mu0[0][:, None] - diag_mu0[1][None, :]
        h += np.diag(diag.ravel())
        occ_full = [
            np.repeat(occs[0], db, axis=0),
            np.tile(occs[1], (da, 1)),
        ]
        docc_a = 0.5 * (occs[0] * (occs[0] - 1.0))
        docc_full = np.repeat(docc_a, db, axis=0)
        multi_full = np.repeat(occs[0] * (occs[0] >= 2), db, axis=0)
        kin_ops = [kin_a, kin_b]
        int_diag = (diag_int[0][:, None] + diag_int[1][None, :] + cross).ravel()

    evals, evecs = np.linalg.eigh(h)
    beta = 1.0 / temperature
    shifted = -beta * (evals - evals[0])
    weights = np.exp(shifted)
    z = weights.sum()
    weights /= z
    log_z = np.log(z) - beta * evals[0]

    prob = evecs**2  # |<fock|eig>|^2, (dim, dim): rows fock, cols eig
    fock_weights = prob @ weights  # thermal probability of each fock state

    density = np.stack([occ.T @ fock_weights for occ in occ_full])
    docc = docc_full.T @ fock_weights
    n_total = density.sum(axis=1)
    multi = float((multi_full.T @ fock_weights).sum())

    e_grand = float(evals @ weights)
    kinetic = 0.0
    for kin in kin_ops:
        diag_in_eigbasis = np.einsum("ik,ik->k", evecs, kin @ evecs)
        kinetic += float(diag_in_eigbasis @ weights)
    interaction = float(int_diag @ fock_weights)
    mu_n = sum(sp.mu * n_total[k] for k, sp in enumerate(species)) if grand else 0.0
    energy = e_grand + mu_n  # add back the homogeneous mu term
    entropy = beta * (e_grand - (-temperature * log_z))

    multi_frac = multi / n_total[0] if n_total[0] > 0 else 0.0
    return EDResult(
        log_z=float(log_z),
        energy=energy,
        energy_grand=e_grand,
        entropy=float(entropy),
        n_total=n_total,
        density=density,
        double_occupancy=docc,
        multi_fraction=float(multi_frac),
        kinetic=kinetic,
        interaction=interaction,
    )
