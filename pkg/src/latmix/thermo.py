"""Entropy from energy curves, initial-state entropies, and entropy matching.

The lattice entropy comes from integrating the measured E(T) curve,

    S(T) = [E(T) - E0]/T + int_Tmin^T [E(T') - E0]/T'^2 dT'  (+ residual),

with E0 the lowest-temperature energy standing in for E(0).  Initial-state
entropies are ideal trapped-gas results (hbar = k_B = 1, energies in J_A).
"""

import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

ZETA3 = 1.2020569031595943
ZETA4 = 1.0823232337111382


class MatchRangeError(ValueError):
    """Requested entropy lies outside the curve's achievable window."""

    def __init__(self, s_target, s_lo, s_hi):
        super().__init__(
            f"target entropy {s_target:.6g} outside achievable window "
            f"[{s_lo:.6g}, {s_hi:.6g}]; extend the temperature grid")
        self.window = (s_lo, s_hi)


# ----------------------------------------------------------------- curves
@dataclass
class ThermoCurve:
    """Sampled (T, E, S) triples of one fixed system."""

    system: str
    temperatures: np.ndarray
    energies: np.ndarray
    energy_errs: np.ndarray
    entropies: np.ndarray = field(default=None)
    entropy_errs: np.ndarray = field(default=None)
    e0: float = None
    n_particles: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# system: {self.system}\n")
        buf.write(f"# N: {self.n_particles}\n")
        buf.write(f"# E0: {self.e0}\n")
        for key, val in sorted(self.meta.items()):
            buf.write(f"# {key}: {val}\n")
        buf.write("T,E,E_err,S,S_err\n")
        for k in range(len(self.temperatures)):
            row = (self.temperatures[k], self.energies[k], self.energy_errs[k],
                   self.entropies[k], self.entropy_errs[k])
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ThermoCurve":
        meta, rows = {}, []
        header_seen = False
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
                continue
            if not header_seen:
                header_seen = True  # column header
                continue
            rows.append([float(x) for x in line.split(",")])
        arr = np.array(rows)
        system = meta.pop("system", "unknown")
        n = float(meta.pop("N", 0.0))
        e0 = meta.pop("E0", "None")
        e0 = None if e0 == "None" else float(e0)
        return cls(system, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3],
                   arr[:, 4], e0, n, meta)


def entropy_from_energy(temperatures, energies, e0, energy_errs=None,
                        e0_err: float = 0.0):
    """Trapezoidal Eq.-2 entropy with linear error propagation.

    Returns (S, sigma_S) arrays on the input grid.  The integral below the
    first grid point uses the constant-integrand extrapolation, which is exact
    for E - E0 ~ T^2 and contributes [E(T_min) - E0]/T_min.
    """
    t = np.asarray(temperatures, dtype=float)
    e = np.asarray(energies, dtype=float)
    if len(t) < 8:
        raise ValueError("need at least 8 samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("temperatures must be strictly ascending")
    sig = np.zeros_like(e) if energy_errs is None else np.asarray(energy_errs, float)
    if np.min(e) - e0 < -3.0 * (np.max(sig) + abs(e0_err)):
        raise ValueError("E0 exceeds the sampled energies beyond noise")

    n = len(t)
    # coefficient matrix: S_k = sum_j c[k, j] (E_j - E0) (+ residual term j=0)
    coeff = np.zeros((n, n))
    for k in range(n):
        coeff[k, k] += 1.0 / t[k]  # boundary term
        for j in range(k):  # trapezoid over [t_j, t_j+1]
            dt = t[j + 1] - t[j]
            coeff[k, j] += 0.5 * dt / t[j] ** 2
            coeff[k, j + 1] += 0.5 * dt / t[j + 1] ** 2
        coeff[k, 0] += 1.0 / t[0]  # below-T_min residual (constant integrand)
    de = e - e0
    s = coeff @ de
    var = coeff**2 @ sig**2 + (coeff.sum(axis=1) * e0_err) ** 2
    return s, np.sqrt(var)


def build_curve(system: str, temperatures, energies, energy_errs,
                n_particles=0.0, e0=None, meta=None) -> ThermoCurve:
    """Assemble a ThermoCurve, deriving S via the Eq.-2 integrator."""
    t = np.asarray(temperatures, float)
    e = np.asarray(energies, float)
    errs = np.asarray(energy_errs, float)
    if e0 is None:
        e0 = float(e[0])
    s, s_err = entropy_from_energy(t, e, e0, errs)
    return ThermoCurve(system, t, e, errs, s, s_err, e0, n_particles,
                       dict(meta or {}))


# ------------------------------------------------- initial-state entropies
def _polylog(s: float, z: float, terms: int = 200_000) -> float:
    if not 0 <= z <= 1:
        raise ValueError("polylog evaluated only on [0, 1]")
    if z == 0:
        return 0.0
    k = np.arange(1, terms + 1, dtype=float)
    return float(np.sum(z**k / k**s))


def bose_critical_temperature(n: float, omega_bar: float) -> float:
    return omega_bar * (n / ZETA3) ** (1.0 / 3.0)


def fermi_temperature(n: float, omega_bar: float) -> float:
    return omega_bar * (6.0 * n) ** (1.0 / 3.0)


def bose_initial_entropy(n: float, omega_bar: float, t_init: float) -> float:
    """Total entropy (k_B = 1) of an ideal trapped Bose gas at T = t_init.

    Below T_c: S/N = 4 zeta(4)/zeta(3) (T/T_c)^3.  Above: fugacity solved from
    Li3(z) = zeta(3) (T_c/T)^3, then S/N = 4 Li4(z)/Li3(z) - ln z.
    """
    if n < 100:
        raise ValueError("semiclassical entropy needs N >= 100")
    if t_init <= 0:
        raise ValueError("temperature must be positive")
    t_c = bose_critical_temperature(n, omega_bar)
    t = t_init / t_c
    if t <= 1.0:
        return n * 4.0 * ZETA4 / ZETA3 * t**3
    target = ZETA3 / t**3
    z = brentq(lambda zz: _polylog(3.0, zz) - target, 1e-12, 1.0, xtol=1e-14)
    li3, li4 = _polylog(3.0, z), _polylog(4.0, z)
    return n * (4.0 * li4 / li3 - np.log(z))


def _trapped_fermi_sn(t_over_tf: float):
    """(S/N, mu/T_F) of the ideal harmonically trapped Fermi gas at T/T_F.

    Semiclassical DOS g(E) = 3 N E^2 / T_F^3; exact Fermi-Dirac quadrature
    (equivalent to the polylog expressions), valid at all degeneracies.
    Everything below is in units of T_F.
    """
    t = float(t_over_tf)
    if t <= 0:
        raise ValueError("temperature must be positive")

    def window(mu):
        e_lo = max(0.0, mu - 60.0 * t)
        e_hi = max(mu + 80.0 * t, e_lo + 40.0 * t, 40.0 * t)
        e = np.linspace(e_lo, e_hi, 6001)
        x = np.clip((e - mu) / t, -700.0, 700.0)
        f = 1.0 / (1.0 + np.exp(x))
        return e_lo, e, f

    def n_of_mu(mu):
        e_lo, e, f = window(mu)
        return e_lo**3 + 3.0 * np.trapezoid(e * e * f, e)  # N/N_target

    mu = brentq(lambda m: n_of_mu(m) - 1.0, -100.0 * t - 10.0,
                1.0 + 100.0 * t + 10.0, xtol=1e-13)
    _, e, f = window(mu)
    s_int = -f * np.log(np.maximum(f, 1e-300)) \
        - (1 - f) * np.log(np.maximum(1 - f, 1e-300))
    s = 3.0 * np.trapezoid(e * e * s_int, e)
    return float(s), float(mu)


def fermi_initial_entropy(n: float, omega_bar: float, t_init: float) -> float:
    """Total entropy (k_B = 1) of an ideal trapped Fermi gas at T = t_init."""
    if n < 100:
        raise ValueError("semiclassical entropy needs N >= 100")
    t_f = fermi_temperature(n, omega_bar)
    s_per_n, _ = _trapped_fermi_sn(t_init / t_f)
    return n * s_per_n


def sommerfeld_entropy(n: float, t_over_tf: float) -> float:
    """Low-T asymptote S/N = pi^2 (T/T_F) for the trapped gas, times N."""
    return n * np.pi**2 * t_over_tf


@dataclass(frozen=True)
class InitialStateModel:
    """Pre-loading harmonic-trap gas: sets S_i for the entropy matching."""

    kind: str  # "bose" | "fermi"
    n: float
    omega_bar: float  # geometric-mean trap frequency, energy units (J_A)

    def characteristic_temperature(self) -> float:
        if self.kind == "bose":
            return bose_critical_temperature(self.n, self.omega_bar)
        if self.kind == "fermi":
            return fermi_temperature(self.n, self.omega_bar)
        raise ValueError(f"unknown initial-state kind {self.kind!r}")

    def entropy(self, t_init: float) -> float:
        if self.kind == "bose":
            return bose_initial_entropy(self.n, self.omega_bar, t_init)
        if self.kind == "fermi":
            return fermi_initial_entropy(self.n, self.omega_bar, t_init)
        raise ValueError(f"unknown initial-state kind {self.kind!r}")

    def entropy_per_particle(self, t_init: float) -> float:
        """S/(N k_B); depends only on T_i relative to T_c or T_F, so it is the
        quantity to match at desk scale where lattice atom numbers are small."""
        return self.entropy(t_init) / self.n


# ------------------------------------------------------- entropy matching
def isotonic_increasing(y, weights=None):
    """Pool-adjacent-violators fit of a nondecreasing sequence."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, float)
    levels = []  # (value, weight, count)
    for yi, wi in zip(y, w):
        levels.append([yi, wi, 1])
        while len(levels) > 1 and levels[-2][0] > levels[-1][0]:
            v2, w2, c2 = levels.pop()
            v1, w1, c1 = levels.pop()
            levels.append([(v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2, c1 + c2])
    out = np.empty_like(y)
    k = 0
    for v, _, c in levels:
        out[k:k + c] = v
        k += c
    return out


@dataclass(frozen=True)
class MatchResult:
    t_fin: float
    t_err: float
    s_target: float
    regularized: bool  # isotonic regression was applied


def match_entropy(s_target: float, curve: ThermoCurve) -> MatchResult:
    """Solve S(T_fin) = s_target on a monotone-cubic interpolant of the curve."""
    t = np.asarray(curve.temperatures, float)
    s = np.asarray(curve.entropies, float)
    s_err = np.asarray(curve.entropy_errs, float)
    regularized = False
    if np.any(np.diff(s) < 0):
        s = isotonic_increasing(s, weights=1.0 / np.maximum(s_err, 1e-12) ** 2)
        regularized = True
        if np.any(np.diff(s) < -1e-12):
            raise RuntimeError("isotonic regression failed")
        # strictly increasing copy for interpolation (break exact ties)
        s = s + np.arange(len(s)) * 1e-12
    if not (s[0] <= s_target <= s[-1]):
        raise MatchRangeError(s_target, float(s[0]), float(s[-1]))
    interp = PchipInterpolator(t, s)
    if s_target == s[0]:
        t_fin = t[0]
    elif s_target == s[-1]:
        t_fin = t[-1]
    else:
        t_fin = brentq(lambda x: interp(x) - s_target, t[0], t[-1], xtol=1e-12)
    slope = float(interp.derivative()(t_fin))
    sig_s = float(np.interp(t_fin, t, s_err))
    t_err = sig_s / slope if slope > 0 else float("inf")
    return MatchResult(float(t_fin), float(t_err), s_target, regularized)


def tfin_vs_ti(curves: dict, initial: InitialStateModel, t_init_grid):
    """Rows (U_AB, T_i, S_i, T_fin, T_fin_err) for each curve and T_i."""
    rows = []
    for u_ab, curve in sorted(curves.items()):
        for t_i in t_init_grid:
            s_i = initial.entropy(t_i)
            m = match_entropy(s_i, curve)
            rows.append((u_ab, t_i, s_i, m.t_fin, m.t_err))
    return np.array(rows)
