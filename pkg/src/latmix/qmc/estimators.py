"""Statistical post-processing of Markov-chain samples.

Binning analysis for error bars, integrated autocorrelation times, jackknife
ratios, and inverse-variance merging of independent chains.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class Obs:
    """Scalar observable: mean, standard error, integrated autocorrelation."""

    mean: float
    err: float
    tau_int: float = 0.5

    def __iter__(self):
        yield self.mean
        yield self.err


def binned_stats(samples: np.ndarray, n_bins: int):
    """Mean and standard error from non-overlapping bin averages."""
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    if n < n_bins or n_bins < 2:
        m = samples.mean() if n else float("nan")
        return m, float("inf")
    per = n // n_bins
    bins = samples[: per * n_bins].reshape(n_bins, per).mean(axis=1)
    err = bins.std(ddof=1) / np.sqrt(n_bins)
    return float(bins.mean()), float(err)


def integrated_autocorrelation(samples: np.ndarray, c_window: float = 6.0) -> float:
    """Sokal-windowed integrated autocorrelation time, in sample units."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 8:
        return 0.5
    x = x - x.mean()
    var = float(x @ x) / n
    if var <= 0:
        return 0.5
    # FFT autocovariance
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, m)
    acf = np.fft.irfft(f * np.conj(f), m)[:n].real / (var * n)
    tau = 0.5
    for t in range(1, n // 2):
        tau += acf[t]
        if t >= c_window * tau:
            break
    return float(max(tau, 0.5))


def jackknife_ratio(num: np.ndarray, den: np.ndarray, n_bins: int):
    """Mean and error of <num>/<den> by leave-one-bin-out jackknife."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = len(num)
    if n < n_bins or n_bins < 2:
        d = den.mean() if n else 0.0
        return (num.mean() / d if d else 0.0), float("inf")
    per = n // n_bins
    bn = num[: per * n_bins].reshape(n_bins, per).mean(axis=1)
    bd = den[: per * n_bins].reshape(n_bins, per).mean(axis=1)
    sn, sd = bn.sum(), bd.sum()
    if sd == 0:
        return 0.0, 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        jack = np.where(sd - bd != 0, (sn - bn) / np.where(sd - bd != 0, sd - bd, 1.0), 0.0)
    full = sn / sd
    err = np.sqrt((n_bins - 1) / n_bins * ((jack - jack.mean()) ** 2).sum())
    return float(full), float(err)


@dataclass
class EstimatorResult:
    """Post-processed observables of one chain (or a merge of chains)."""

    temperature: float
    n_measurements: int
    n_skipped: int  # G-sector measurement attempts
    bins_ok: bool  # error bars unreliable when False

    energy: Obs  # physical energy: kinetic + interaction + trap, in J_A
    energy_grand: Obs  # energy - sum_s mu_s N_s
    kinetic: Obs
    potential: Obs  # interaction + trap + mu parts (diagonal energy)
    interaction: Obs  # U and U_AB terms only
    n_total: list  # per-species Obs
    double_occupancy_total: Obs
    multi_fraction: Obs

    density: np.ndarray  # (n_species, n_sites) means
    density_err: np.ndarray
    docc_grid: np.ndarray  # per-site <n_A (n_A-1)/2>
    docc_grid_err: np.ndarray

    seed: Optional[int] = None
    move_stats: Optional[dict] = None
    meta: dict = field(default_factory=dict)

    def scalars(self):
        out = {
            "energy": self.energy,
            "energy_grand": self.energy_grand,
            "kinetic": self.kinetic,
            "potential": self.potential,
            "interaction": self.interaction,
            "double_occupancy_total": self.double_occupancy_total,
            "multi_fraction": self.multi_fraction,
        }
        for k, obs in enumerate(self.n_total):
            out[f"n_total_{k}"] = obs
        return out


def _merge_obs(values, errors):
    values = np.asarray(values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if np.all(np.isfinite(errors)) and np.all(errors > 0):
        w = 1.0 / errors**2
        return float((w * values).sum() / w.sum()), float(1.0 / np.sqrt(w.sum()))
    # zero-variance observables (e.g. hard-core double occupancy) or
    # unreliable bars: fall back to the plain mean
    err = 0.0 if np.all(errors == 0) else float("inf")
    return float(values.mean()), err


def merge_results(results: list) -> EstimatorResult:
    """Inverse-variance merge of independent chains (pure reduction)."""
    if not results:
        raise ValueError("nothing to merge")
    if len(results) == 1:
        return results[0]
    base = results[0]

    def merge_scalar(getter):
        obs = [getter(r) for r in results]
        m, e = _merge_obs([o.mean for o in obs], [o.err for o in obs])
        tau = float(np.mean([o.tau_int for o in obs]))
        return Obs(m, e, tau)

    err = np.stack([r.density_err for r in results])
    val = np.stack([r.density for r in results])
    with np.errstate(divide="ignore"):
        w = 1.0 / err**2
    if not np.all(np.isfinite(w)):
        w = np.ones_like(w)
    dens = (w * val).sum(axis=0) / w.sum(axis=0)
    dens_err = 1.0 / np.sqrt(w.sum(axis=0))

    errd = np.stack([r.docc_grid_err for r in results])
    vald = np.stack([r.docc_grid for r in results])
    with np.errstate(divide="ignore"):
        wd = 1.0 / errd**2
    if not np.all(np.isfinite(wd)):
        wd = np.ones_like(wd)
    docc = (wd * vald).sum(axis=0) / wd.sum(axis=0)
    docc_err = 1.0 / np.sqrt(wd.sum(axis=0))

    return EstimatorResult(
        temperature=base.temperature,
        n_measurements=sum(r.n_measurements for r in results),
        n_skipped=sum(r.n_skipped for r in results),
        bins_ok=all(r.bins_ok for r in results),
        energy=merge_scalar(lambda r: r.energy),
        energy_grand=merge_scalar(lambda r: r.energy_grand),
        kinetic=merge_scalar(lambda r: r.kinetic),
        potential=merge_scalar(lambda r: r.potential),
        interaction=merge_scalar(lambda r: r.interaction),
        n_total=[merge_scalar(lambda r, k=k: r.n_total[k])
                 for k in range(len(base.n_total))],
        double_occupancy_total=merge_scalar(lambda r: r.double_occupancy_total),
        multi_fraction=merge_scalar(lambda r: r.multi_fraction),
        density=dens,
        density_err=dens_err,
        docc_grid=docc,
        docc_grid_err=docc_err,
        seed=None,
        move_stats=None,
        meta={"merged_from": [r.seed for r in results]},
    )
