"""Real, site-centered Wannier functions from Bloch sums.

Phase convention: even bands have Bloch functions real and positive at the
site center, odd bands have real positive slope there; the resulting Wannier
function is real, (anti)symmetric, and exponentially localized.
"""

from dataclasses import dataclass

import numpy as np

from .bands import BandStructure, band_structure


class WannierError(RuntimeError):
    """Raised when the sampled Wannier function fails its normalization check."""


@dataclass(frozen=True)
class WannierFunction:
    band: int
    v_over_er: float
    x: np.ndarray  # positions in units of the lattice spacing, centered on one site
    w: np.ndarray  # real samples, normalized to unit L2 norm in site units

    def norm(self) -> float:
        return float(np.trapezoid(self.w**2, self.x))

    def centroid(self) -> float:
        return float(np.trapezoid(self.x * self.w**2, self.x))


def harmonic_ground_width(v_over_er: float) -> float:
    """Gaussian width (sites) of the on-site harmonic approximation.

    sigma^2 = a^2 / (pi^2 sqrt(V/E_R)); returns sigma in units of a.
    """
    return 1.0 / (np.pi * v_over_er**0.25)


def harmonic_state(band: int, sigma: float, x: np.ndarray) -> np.ndarray:
    """Harmonic-oscillator eigenfunction (band 0 or 1) of width sigma, in sites."""
    g = np.exp(-(x**2) / (2.0 * sigma**2)) / (np.pi * sigma**2) ** 0.25
    if band == 0:
        return g
    if band == 1:
        return np.sqrt(2.0) * (x / sigma) * g
    raise ValueError("only bands 0 and 1 are supported")


def wannier(v_over_er: float, band: int, span_sites: float = 10.0,
            n_points: int = 2001, bands: BandStructure | None = None,
            norm_tol: float = 1e-4) -> WannierFunction:
    """Wannier function of the given band, centered on the site at x = 0."""
    if band not in (0, 1):
        raise ValueError("only bands 0 and 1 are supported")
    if span_sites < 5:
        raise ValueError("grid must span at least 5 sites")
    if bands is None:
        bands = band_structure(v_over_er, n_bands=max(2, band + 1))

    x = np.linspace(-span_sites / 2.0, span_sites / 2.0, n_points)
    q = bands.q  # units of k_L; positions enter as exp(i (q + 2m) pi x)
    m = bands.wave_indices
    c = bands.coefficients[band]  # (n_q, n_waves), real

    # phase fixing per q: value (even band) or slope (odd band) real positive at x=0
    if band % 2 == 0:
        s = np.sign(c.sum(axis=1))
    else:
        # slope at 0 ~ sum_m c_m (q + 2m)
        s = np.sign((c * (q[:, None] + 2.0 * m)).sum(axis=1))
    s[s == 0] = 1.0
    c = c * s[:, None]

    # w(x) = N_q^{-1} sum_q sum_m c_m(q) exp(i (q + 2m) pi x)   (times -i for odd bands)
    # each Bloch state carries unit weight per cell, so the 1/N_q makes
    # integral |w|^2 over the Born-von-Karman region exactly 1
    k = (q[:, None] + 2.0 * m)[..., None] * (np.pi * x)  # (n_q, n_waves, n_x)
    phases = np.exp(1j * k)
    w = np.einsum("qm,qmx->x", c, phases) / len(q)
    if band % 2 == 1:
        w = -1j * w
    if np.max(np.abs(w.imag)) > 1e-8 * np.max(np.abs(w.real)):
        raise WannierError("phase convention failed to produce a real function")
    w = w.real

    norm = np.trapezoid(w**2, x)
    if abs(norm - 1.0) > norm_tol:
        raise WannierError(
            f"normalization {norm:.6f} deviates from 1 by more than {norm_tol} "
            "(grid too coarse or span too small)")
    return WannierFunction(band, v_over_er, x, w)
