"""1D sinusoidal-lattice band structure in recoil units.

Plane-wave diagonalization of  -d^2/dx^2 + (V/E_R) sin^2(k_L x)  with
quasimomentum q in units of k_L and energies in units of E_R.  Connects
lattice depth to the Hubbard tunneling and feeds the Wannier construction.
"""

from dataclasses import dataclass

import numpy as np


class ConvergenceError(RuntimeError):
    """Raised when the plane-wave cutoff fails to converge band energies."""


@dataclass(frozen=True)
class BandStructure:
    v_over_er: float
    q: np.ndarray  # quasimomentum grid, units of k_L, in [-1, 1)
    energies: np.ndarray  # (n_bands, n_q) in E_R
    coefficients: np.ndarray  # (n_bands, n_q, n_waves) real plane-wave amplitudes
    wave_indices: np.ndarray  # plane-wave index m: momentum components q + 2m

    @property
    def n_bands(self) -> int:
        return self.energies.shape[0]

    def bandwidth(self, band: int) -> float:
        e = self.energies[band]
        return float(e.max() - e.min())

    def gap(self, lower: int, upper: int) -> float:
        """Direct gap at q=0 between two bands."""
        iq = int(np.argmin(np.abs(self.q)))
        return float(self.energies[upper, iq] - self.energies[lower, iq])


def _diagonalize(v_over_er: float, q: np.ndarray, n_waves: int):
    m = np.arange(n_waves) - n_waves // 2
    energies = np.empty((len(q), n_waves))
    vectors = np.empty((len(q), n_waves, n_waves))
    off = -0.25 * v_over_er * np.ones(n_waves - 1)
    for i, qi in enumerate(q):
        h = np.diag((qi + 2.0 * m) ** 2 + 0.5 * v_over_er)
        h += np.diag(off, 1) + np.diag(off, -1)
        w, v = np.linalg.eigh(h)
        energies[i] = w
        vectors[i] = v
    return m, energies, vectors


def band_structure(v_over_er: float, n_bands: int = 4, n_q: int = 64,
                   n_waves: int = 21, tol: float = 1e-8,
                   max_doublings: int = 6) -> BandStructure:
    """Diagonalize the 1D lattice Hamiltonian on a q grid.

    The plane-wave cutoff is doubled until E_0(0) changes by less than
    `tol` (in E_R); raises ConvergenceError if that never happens.
    """
    if v_over_er < 0:
        raise ValueError("lattice depth must be >= 0")
    if n_bands < 2:
        raise ValueError("need at least 2 bands")
    if n_q < 16:
        raise ValueError("need at least 16 quasimomentum points")

    # q = -1 included, +1 excluded (same Bloch state, one reciprocal vector away)
    q = -1.0 + 2.0 * np.arange(n_q) / n_q
    q0 = np.array([0.0])

    nw = n_waves if n_waves % 2 == 1 else n_waves + 1
    _, e_prev, _ = _diagonalize(v_over_er, q0, nw)
    for _ in range(max_doublings):
        nw_next = 2 * nw + 1
        _, e_next, _ = _diagonalize(v_over_er, q0, nw_next)
        if abs(e_next[0, 0] - e_prev[0, 0]) <= tol:
            break
        nw, e_prev = nw_next, e_next
    else:
        raise ConvergenceError(
            f"E_0(0) not converged to {tol} E_R at {nw} plane waves "
            f"(last change {abs(e_next[0, 0] - e_prev[0, 0]):.3e})")

    m, energies, vectors = _diagonalize(v_over_er, q, nw)
    # vectors[q][:, n] -> coefficients[(n, q, m)]
    coeff = np.transpose(vectors[:, :, :n_bands], (2, 0, 1))
    return BandStructure(v_over_er, q, energies.T[:n_bands].copy(), coeff, m)


def tunneling_from_depth(v_over_er: float, **kwargs) -> float:
    """Hubbard J in recoil units from the lowest-band width, J = W_0 / 4."""
    if v_over_er <= 1:
        raise ValueError("tunneling extraction needs V/E_R > 1")
    bs = band_structure(v_over_er, **kwargs)
    return bs.bandwidth(0) / 4.0


def deep_lattice_tunneling(v_over_er: float) -> float:
    """Asymptotic J/E_R ~ (4/sqrt(pi)) (V/E_R)^(3/4) exp(-2 sqrt(V/E_R)).

    Sanity oracle only; the diagonalization value is the reference.
    """
    s = np.sqrt(v_over_er)
    return 4.0 / np.sqrt(np.pi) * v_over_er**0.75 * np.exp(-2.0 * s)
