"""Physical constants and unit conversions.

These live in the configuration layer only: the science modules work in
dimensionless units (energies in J_A, lengths in lattice sites).
"""

import math

HBAR = 1.054571817e-34  # J s
KB = 1.380649e-23  # J / K
AMU = 1.66053906660e-27  # kg

MASS_RB87 = 86.909180527 * AMU
MASS_K40 = 39.96399848 * AMU

ATOM_MASSES = {
    "Rb87": MASS_RB87,
    "K40": MASS_K40,
}


def recoil_energy(mass: float, spacing_m: float) -> float:
    """E_R = hbar^2 k_L^2 / 2m with k_L = pi / a, in joules."""
    k_l = math.pi / spacing_m
    return (HBAR * k_l) ** 2 / (2.0 * mass)


def trap_curvature(mass: float, omega: float, spacing_m: float) -> float:
    """Harmonic confinement curvature w = (1/2) m omega^2 a^2 in joules per site^2.

    omega is the angular trap frequency (rad/s); site coordinates are integers.
    """
    return 0.5 * mass * omega**2 * spacing_m**2
