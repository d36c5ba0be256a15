"""Exact thermodynamics of noninteracting lattice fermions in a separable trap.

Per-axis tridiagonal diagonalization feeds a full 3D mode sum: densities,
particle number, entropy, and the fast column-density contraction.  Spin
polarized, so no interactions enter.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .model.lattice import LatticeGeometry, SpeciesParams

OCC_CUT = 1e-14  # modes with f below/above the cut contribute 0 / 1 analytically


@dataclass(frozen=True)
class AxisSpectrum:
    axis: int
    energies: np.ndarray  # ascending, length L
    states: np.ndarray  # (L, L): states[:, n] is eigenvector n on the sites


@dataclass(frozen=True)
class FermiThermo:
    mu: float
    temperature: float
    n_total: float
    entropy: float
    energy: float


def axis_spectrum(j_hop: float, w: float, length: int, axis: int = 0) -> AxisSpectrum:
    """Eigen-decomposition of one axis: open tight-binding chain + parabola."""
    if length < 1:
        raise ValueError("axis length must be >= 1")
    xi = np.arange(length) - (length - 1) / 2.0
    h = np.diag(w * xi**2)
    if length >= 2:
        h -= j_hop * (np.diag(np.ones(length - 1), 1) + np.diag(np.ones(length - 1), -1))
    evals, evecs = np.linalg.eigh(h)
    return AxisSpectrum(axis, evals, evecs)


def axis_spectra(geometry: LatticeGeometry, species: SpeciesParams):
    return tuple(axis_spectrum(species.J, species.trap_w[a], geometry.shape[a], a)
                 for a in range(3))


def _fermi(e, mu, temperature):
    x = np.clip((e - mu) / temperature, -500.0, 500.0)
    return 1.0 / (1.0 + np.exp(x))


def mode_energies(spectra) -> np.ndarray:
    ex, ey, ez = (s.energies for s in spectra)
    return ex[:, None, None] + ey[None, :, None] + ez[None, None, :]


def fermi_observables(spectra, mu: float, temperature: float,
                      want_density: bool = True, factorized: bool = False):
    """Exact 3D observables: (FermiThermo, density grid or None, column density).

    factorized=True instead evaluates the literal per-axis factorization
    n(r) = n(x) n(y) n(z) with the shared chemical potential (comparison only:
    that form is not the grand-canonical density of the separable problem).
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    e3 = mode_energies(spectra)
    f = _fermi(e3, mu, temperature)
    n_total = float(f.sum())

    with np.errstate(divide="ignore", invalid="ignore"):
        s_mode = -f * np.log(np.where(f > OCC_CUT, f, 1.0)) \
            - (1 - f) * np.log(np.where(1 - f > OCC_CUT, 1 - f, 1.0))
    entropy = float(s_mode.sum())
    energy = float((e3 * f).sum())

    px, py, pz = (s.states**2 for s in spectra)  # (site, mode)

    if factorized:
        nx = px @ _fermi(spectra[0].energies, mu, temperature)
        ny = py @ _fermi(spectra[1].energies, mu, temperature)
        nz = pz @ _fermi(spectra[2].energies, mu, temperature)
        density = nx[:, None, None] * ny[None, :, None] * nz[None, None, :]
        column = density.sum(axis=2)
    else:
        density = None
        if want_density:
            density = np.einsum("xa,yb,zc,abc->xyz", px, py, pz, f, optimize=True)
        # column density via the cheap contraction: sum_z first
        fz = f.sum(axis=2)  # h(E_a + E_b) summed over z modes
        column = np.einsum("xa,yb,ab->xy", px, py, fz, optimize=True)

    thermo = FermiThermo(mu, temperature, n_total, entropy, energy)
    return thermo, density, column


def tune_mu_fermi(spectra, target_n: float, temperature: float,
                  tol_rel: float = 1e-6, max_iter: int = 200) -> float:
    """Newton iteration on the smooth monotone <N>(mu), bisection fallback."""
    e3 = mode_energies(spectra).ravel()
    n_modes = e3.size
    if not 0 < target_n < n_modes:
        raise ValueError(f"target N must lie in (0, {n_modes})")

    def n_and_slope(mu):
        f = _fermi(e3, mu, temperature)
        return f.sum(), (f * (1 - f)).sum() / temperature

    lo, hi = e3.min() - 60 * temperature, e3.max() + 60 * temperature
    mu = 0.5 * (lo + hi)
    tol = tol_rel * target_n
    for _ in range(max_iter):
        n, dn = n_and_slope(mu)
        if abs(n - target_n) <= tol:
            return float(mu)
        if n < target_n:
            lo = mu
        else:
            hi = mu
        if dn > 0:
            step = mu + (target_n - n) / dn
            mu = step if lo < step < hi else 0.5 * (lo + hi)
        else:
            mu = 0.5 * (lo + hi)
    raise RuntimeError(f"mu tuning did not converge (last N={n:.6g})")


def fermi_entropy_curve(spectra, n_target: float, temperatures) -> np.ndarray:
    """(T, S, mu, E) rows with mu re-tuned to the target N at each T."""
    temperatures = np.asarray(temperatures, dtype=float)
    if np.any(np.diff(temperatures) <= 0):
        raise ValueError("temperature grid must be ascending")
    rows = []
    for t in temperatures:
        mu = tune_mu_fermi(spectra, n_target, t)
        thermo, _, _ = fermi_observables(spectra, mu, t, want_density=False)
        rows.append((t, thermo.entropy, mu, thermo.energy))
    return np.array(rows)
