"""STIRAP band transfer: photon momentum kick and excited-band population.

Two co-propagating photons carry a wavevector difference that kicks the
transferred molecule; the resulting first-excited-band population per axis is
evaluated three ways: a closed-form harmonic estimate, an exact Gaussian
overlap formula, and direct quadrature over oscillator or Wannier states.
A three-level dark-state integrator verifies the transfer adiabaticity.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .constants import AMU, HBAR, MASS_K40, MASS_RB87, recoil_energy
from .model.wannier import harmonic_ground_width, harmonic_state, wannier


@dataclass(frozen=True)
class StirapGeometry:
    """Beam and lattice geometry for the two-photon transfer."""

    lambda_up_nm: float = 968.0
    lambda_down_nm: float = 689.0
    beam_direction: Tuple[float, float, float] = None  # unit vector, shared
    lattice_spacing_nm: float = 532.0

    def __post_init__(self):
        if self.lambda_up_nm <= 0 or self.lambda_down_nm <= 0:
            raise ValueError("wavelengths must be positive")
        d = self.beam_direction
        if d is None:
            # default: in the x-y lattice plane at 45 degrees to both axes
            d = (1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0), 0.0)
        d = np.asarray(d, dtype=float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("beam direction must be a unit vector")
        object.__setattr__(self, "beam_direction", tuple(d))


@dataclass(frozen=True)
class BandTransferResult:
    k_xi_a: np.ndarray  # dimensionless momentum transfer per axis
    p_harmonic: np.ndarray  # per-axis excited fraction, closed form
    p_numeric: np.ndarray  # per-axis excited fraction, quadrature
    total_harmonic: float
    total_numeric: float
    alpha_ratio: float
    v_over_er: np.ndarray
    lamb_dicke: np.ndarray  # k_xi a / (V/E_R)^(1/4) per axis
    valid: bool  # False once any per-axis fraction exceeds 0.1 or LD >= 1


def molecular_lattice_depth(v_a_recoils: float = 20.0, v_b_recoils: float = 9.0,
                            mass_a: float = MASS_RB87, mass_b: float = MASS_K40,
                            spacing_nm: float = 532.0) -> float:
    """Feshbach-molecule depth in molecular recoils, by polarizability additivity.

    The molecule sees the summed light shifts of its atoms,
    V_mol = V_A + V_B (in absolute energy), re-expressed in the recoil of the
    combined mass.
    """
    a_m = spacing_nm * 1e-9
    e_a = recoil_energy(mass_a, a_m)
    e_b = recoil_energy(mass_b, a_m)
    e_mol = recoil_energy(mass_a + mass_b, a_m)
    return (v_a_recoils * e_a + v_b_recoils * e_b) / e_mol


def momentum_transfer(geom: StirapGeometry) -> np.ndarray:
    """k_xi a per lattice axis for the photon pair (dimensionless)."""
    k_u = 2.0 * np.pi / geom.lambda_up_nm
    k_d = 2.0 * np.pi / geom.lambda_down_nm
    dk = (k_u - k_d) * np.asarray(geom.beam_direction)
    return dk * geom.lattice_spacing_nm


def harmonic_band_ratio(k_xi_a: float, alpha_ratio: float,
                        v_over_er: float) -> float:
    """Closed-form first-excited-band fraction, harmonic Wannier estimate:

        p = 2 (k a)^2 alpha / [pi^2 (1 + alpha)^2 sqrt(V/E_R)].
    """
    if v_over_er <= 1:
        raise ValueError("needs V/E_R > 1")
    if alpha_ratio <= 0:
        raise ValueError("polarizability ratio must be positive")
    return (2.0 * k_xi_a**2 * alpha_ratio
            / (np.pi**2 * (1.0 + alpha_ratio) ** 2 * np.sqrt(v_over_er)))


def gaussian_band_ratio(k_xi_a: float, sigma_f: float, sigma_g: float) -> float:
    """Exact |<1_g|e^{ikx}|0_f>|^2 / |<0_g|e^{ikx}|0_f>|^2 for Gaussian states.

    Widths in lattice-spacing units; the exponential factors cancel in the
    ratio, leaving 2 k^2 sigma_f^4 sigma_g^2 / (sigma_f^2 + sigma_g^2)^2.
    """
    return (2.0 * k_xi_a**2 * sigma_f**4 * sigma_g**2
            / (sigma_f**2 + sigma_g**2) ** 2)


def numeric_band_ratio(k_xi_a: float, v_over_er: float, alpha_ratio: float,
                       source: str = "harmonic", n_points: int = 4001,
                       span_sites: float = 10.0, tol: float = 1e-6) -> float:
    """Quadrature |<w1_g|e^{ikx}|w0_f>|^2 / |<w0_g|e^{ikx}|w0_f>|^2.

    source="harmonic": oscillator states with widths from V and alpha V.
    source="wannier":  exact Wannier functions of both lattice depths.
    The grid is doubled until the ratio changes by less than tol.
    """
    if source not in ("harmonic", "wannier"):
        raise ValueError(f"unknown state source {source!r}")

    def ratio(n):
        x = np.linspace(-span_sites / 2, span_sites / 2, n)
        if source == "harmonic":
            sf = harmonic_ground_width(v_over_er)
            sg = harmonic_ground_width(alpha_ratio * v_over_er)
            f0 = harmonic_state(0, sf, x)
            g0 = harmonic_state(0, sg, x)
            g1 = harmonic_state(1, sg, x)
        else:
            wf = wannier(v_over_er, 0, span_sites=span_sites, n_points=n)
            g0w = wannier(alpha_ratio * v_over_er, 0, span_sites=span_sites,
                          n_points=n)
            g1w = wannier(alpha_ratio * v_over_er, 1, span_sites=span_sites,
                          n_points=n)
            f0, g0, g1 = wf.w, g0w.w, g1w.w
        phase = np.exp(1j * k_xi_a * x)
        num = np.trapezoid(g1 * phase * f0, x)
        den = np.trapezoid(g0 * phase * f0, x)
        return float(abs(num) ** 2 / abs(den) ** 2)

    r = ratio(n_points)
    r2 = ratio(2 * n_points - 1)
    if abs(r2 - r) > tol * max(1.0, abs(r2)):
        raise RuntimeError(
            f"quadrature not converged: {r:.3e} -> {r2:.3e} on grid doubling")
    return r2


def total_excited_population(geom: StirapGeometry, alpha_ratio: float = 0.9,
                             v_over_er=None, method: str = "both") -> BandTransferResult:
    """Sum the per-axis excited-band fractions in the small-transfer limit."""
    if v_over_er is None:
        v_over_er = molecular_lattice_depth()
    v = np.broadcast_to(np.asarray(v_over_er, dtype=float), (3,)).copy()
    ka = momentum_transfer(geom)
    p_h = np.zeros(3)
    p_n = np.zeros(3)
    ld = np.abs(ka) / v**0.25
    for ax in range(3):
        if ka[ax] == 0.0:
            continue
        p_h[ax] = harmonic_band_ratio(ka[ax], alpha_ratio, v[ax])
        if method in ("both", "numeric"):
            p_n[ax] = numeric_band_ratio(ka[ax], v[ax], alpha_ratio,
                                         source="harmonic")
        else:
            p_n[ax] = p_h[ax]
    valid = bool(np.all(p_h <= 0.1) and np.all(p_n <= 0.1) and np.all(ld < 1.0))
    return BandTransferResult(
        k_xi_a=ka, p_harmonic=p_h, p_numeric=p_n,
        total_harmonic=float(p_h.sum()), total_numeric=float(p_n.sum()),
        alpha_ratio=alpha_ratio, v_over_er=v, lamb_dicke=ld, valid=valid)


def formula_vs_oracle_report(alpha_ratio: float = 0.9, v_over_er: float = None):
    """Constant ratio between the printed closed form and the Gaussian oracle.

    The closed form carries alpha/(1+alpha)^2 where the direct Gaussian
    overlap yields sqrt(alpha)/(1+sqrt(alpha))^2; both are reported, never
    reconciled.
    """
    if v_over_er is None:
        v_over_er = molecular_lattice_depth()
    sf = harmonic_ground_width(v_over_er)
    sg = harmonic_ground_width(alpha_ratio * v_over_er)
    ks = np.linspace(0.2, 2.0, 10)
    ratios = np.array([harmonic_band_ratio(k, alpha_ratio, v_over_er)
                       / gaussian_band_ratio(k, sf, sg) for k in ks])
    return {
        "k_grid": ks,
        "formula_over_oracle": ratios,
        "constant": float(ratios.mean()),
        "spread": float(ratios.max() - ratios.min()),
        "alpha_ratio": alpha_ratio,
        "v_over_er": float(v_over_er),
    }


# ------------------------------------------------------- pulse evolution
@dataclass(frozen=True)
class StirapPulses:
    """Counterintuitive Gaussian pulse pair (downward leg first)."""

    rabi_peak_up: float
    rabi_peak_down: float
    width: float
    delay: float  # down-pulse peak precedes the up-pulse peak by this much

    def omega_up(self, t, t_total):
        t0 = 0.5 * t_total + 0.5 * self.delay
        return self.rabi_peak_up * np.exp(-((t - t0) ** 2) / (2 * self.width**2))

    def omega_down(self, t, t_total):
        t0 = 0.5 * t_total - 0.5 * self.delay
        return self.rabi_peak_down * np.exp(-((t - t0) ** 2) / (2 * self.width**2))


@dataclass(frozen=True)
class StirapEvolution:
    populations: Tuple[float, float, float]  # (|f>, |e>, |g>) at the end
    efficiency: float  # final |g> population
    max_intermediate: float  # peak |e> population during the sweep
    norm_error: float
    times: np.ndarray
    history: np.ndarray  # (3, n_t) populations


def stirap_evolution(pulses: StirapPulses, duration: float,
                     detuning_single: float = 0.0, detuning_two: float = 0.0,
                     rtol: float = 1e-10, atol: float = 1e-12,
                     n_store: int = 400) -> StirapEvolution:
    """Integrate the three-level Schroedinger equation through the pulse pair.

    Basis (|f>, |e>, |g>); H = -[Omega_u/2](|e><f| + h.c.)
    - [Omega_d/2](|e><g| + h.c.) + detunings on |e> and |g>.
    """

    def rhs(t, psi):
        c = psi[:3] + 1j * psi[3:]
        ou = 0.5 * pulses.omega_up(t, duration)
        od = 0.5 * pulses.omega_down(t, duration)
        h = np.array([[0.0, -ou, 0.0],
                      [-ou, -detuning_single, -od],
                      [0.0, -od, -detuning_two]])
        dc = -1j * (h @ c)
        return np.concatenate([dc.real, dc.imag])

    psi0 = np.zeros(6)
    psi0[0] = 1.0  # start in the Feshbach-molecule state
    t_eval = np.linspace(0.0, duration, n_store)
    sol = solve_ivp(rhs, (0.0, duration), psi0, method="DOP853",
                    rtol=rtol, atol=atol, t_eval=t_eval)
    if not sol.success:
        raise RuntimeError(f"integrator failed: {sol.message}")
    c = sol.y[:3] + 1j * sol.y[3:]
    pops = np.abs(c) ** 2
    norm_err = float(np.max(np.abs(pops.sum(axis=0) - 1.0)))
    final = pops[:, -1]
    return StirapEvolution(
        populations=tuple(float(p) for p in final),
        efficiency=float(final[2]),
        max_intermediate=float(pops[1].max()),
        norm_error=norm_err,
        times=sol.t,
        history=pops,
    )


def two_level_spectral_profile(rabi_peak: float, detunings) -> np.ndarray:
    """Transfer profile of a pi-area two-level pulse at the given Rabi scale.

    The pulse width follows from the area condition, so its spectral width is
    set by the Rabi frequency; with a drive scale far above the band spacing
    the profile is flat across one spacing (the unresolved-band argument).
    """
    width = np.pi / (rabi_peak * np.sqrt(2.0 * np.pi))  # Gaussian pi-pulse
    duration = 12.0 * width
    out = []
    for delta in np.atleast_1d(detunings):
        def rhs(t, psi):
            c = psi[:2] + 1j * psi[2:]
            om = 0.5 * rabi_peak * np.exp(-((t - duration / 2) ** 2)
                                          / (2 * width**2))
            h = np.array([[0.0, -om], [-om, -delta]])
            dc = -1j * (h @ c)
            return np.concatenate([dc.real, dc.imag])

        psi0 = np.array([1.0, 0.0, 0.0, 0.0])
        sol = solve_ivp(rhs, (0.0, duration), psi0, method="DOP853",
                        rtol=1e-10, atol=1e-12)
        c = sol.y[:2, -1] + 1j * sol.y[2:, -1]
        out.append(abs(c[1]) ** 2)
    return np.array(out)
