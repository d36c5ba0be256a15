"""Acceptance suite: one test per criterion, one pass/fail line each.

Run with `pytest tests/test_acceptance.py -s` to see the report lines.
Criterion 10 is the long mixture job and carries the `slow` marker:
`pytest -m slow tests/test_acceptance.py -s`.
"""

import time

import numpy as np
import pytest
from scipy.stats import chisquare

from latmix import constants
from latmix.fermions import axis_spectra, fermi_observables, tune_mu_fermi
from latmix.imaging import (GAUSSIAN, TF, column_density, fit_profile,
                            gaussian_blur, synthetic_truth)
from latmix.model import LatticeGeometry, MixtureParams, SpeciesParams
from latmix.model.bands import tunneling_from_depth
from latmix.model.wannier import harmonic_ground_width
from latmix.oracle import atomic_limit, ed_thermal, hardcore_1d_free_fermion
from latmix.qmc import ChainConfig, WormChain, merge_results, run_chain, tune_mu
from latmix.stirap import (StirapGeometry, StirapPulses, formula_vs_oracle_report,
                           gaussian_band_ratio, molecular_lattice_depth,
                           numeric_band_ratio, stirap_evolution,
                           total_excited_population)
from latmix.thermo import (InitialStateModel, ZETA3, ZETA4, build_curve,
                           bose_critical_temperature, bose_initial_entropy,
                           entropy_from_energy, match_entropy,
                           _trapped_fermi_sn)


def report(criterion, ok, detail):
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line, flush=True)
    assert ok, line


# --------------------------------------------------------------- criterion 1
ED_SYSTEMS = {
    "soft-core U/J=4 (4-site chain, trap)": (
        lambda: (MixtureParams(SpeciesParams("A", "soft-core", J=1, U=4.0,
                                             mu=3.0, trap_w=(0.8, 0, 0),
                                             n_max=5)),
                 LatticeGeometry((4, 1, 1))), 30000),
    "soft-core U/J=8 (2x2 plaquette, trap)": (
        lambda: (MixtureParams(SpeciesParams("A", "soft-core", J=1, U=8.0,
                                             mu=4.0, trap_w=(1.2, 1.2, 0),
                                             n_max=5)),
                 LatticeGeometry((2, 2, 1))), 40000),
    "soft-core U/J=20 (2-site, trap)": (
        lambda: (MixtureParams(SpeciesParams("A", "soft-core", J=1, U=20.0,
                                             mu=8.0, trap_w=(4.0, 0, 0),
                                             n_max=5)),
                 LatticeGeometry((2, 1, 1))), 60000),
    "hard-core (8-site chain, trap)": (
        lambda: (MixtureParams(SpeciesParams("A", "hard-core", J=1, mu=2.0,
                                             trap_w=(0.3, 0, 0))),
                 LatticeGeometry((8, 1, 1))), 40000),
    "mixture U_AB/J=-10 (2-site)": (
        lambda: (MixtureParams(
            SpeciesParams("A", "soft-core", J=1, U=8.0, mu=3.0, n_max=5),
            SpeciesParams("B", "hard-core", J=0.7, mu=0.5), -10.0),
            LatticeGeometry((2, 1, 1))), 50000),
    "mixture U_AB/J=+10 (2-site)": (
        lambda: (MixtureParams(
            SpeciesParams("A", "soft-core", J=1, U=8.0, mu=6.0,
                          trap_w=(3.0, 0, 0), n_max=5),
            SpeciesParams("B", "hard-core", J=0.7, mu=2.0,
                          trap_w=(2.0, 0, 0)), 10.0),
            LatticeGeometry((2, 1, 1))), 60000),
}


def test_criterion_1_qmc_ed_equivalence():
    t0 = time.time()
    worst = {"pull": 0.0, "rel": 0.0, "case": ""}
    seed = 42_000
    for name, (make, sweeps) in ED_SYSTEMS.items():
        system, geometry = make()
        for temperature in (0.5, 2.0, 10.0):
            seed += 17
            ed = ed_thermal(system, geometry, temperature)
            res = run_chain(system, geometry, temperature,
                            ChainConfig(seed=seed, therm_sweeps=2000,
                                        meas_sweeps=sweeps, n_bins=32))
            sig_e = max(res.energy.err, 1e-9)
            rel = sig_e / abs(res.energy.mean)
            pulls = [abs(res.energy.mean - ed.energy) / sig_e]
            pulls.append(np.max(np.abs(res.density - ed.density)
                                / np.maximum(res.density_err, 1e-6)))
            pulls.append(abs(res.double_occupancy_total.mean
                             - float(ed.double_occupancy.sum()))
                         / max(res.double_occupancy_total.err, 1e-6))
            tag = f"{name} T={temperature}"
            if max(pulls) > worst["pull"]:
                worst.update(pull=max(pulls), case=tag)
            worst["rel"] = max(worst["rel"], rel)
            assert rel <= 0.01, f"{tag}: sigma/|E| = {rel:.3%}"
            assert max(pulls) <= 3.0, f"{tag}: pull {max(pulls):.2f} sigma"
    report(1, True,
           f"6 systems x 3 temperatures vs ED: worst pull "
           f"{worst['pull']:.2f} sigma ({worst['case']}), worst sigma/|E| "
           f"{worst['rel']:.2%}, {time.time() - t0:.0f}s")


# --------------------------------------------------------------- criterion 2
def test_criterion_2_hardcore_free_fermion():
    t0 = time.time()
    length, w, n_target = 16, 0.5, 8.0
    xi = np.arange(length) - (length - 1) / 2.0
    worst = 0.0
    seed = 52_000
    for temperature in (0.5, 1.0, 2.0):
        seed += 13
        # exact mu for <N> = 8 from the fermion side (deterministic)
        from scipy.optimize import brentq

        def n_of_mu(mu):
            return hardcore_1d_free_fermion(
                1.0, mu - w * xi**2, temperature).n_total

        mu = brentq(lambda m: n_of_mu(m) - n_target, -10, 30, xtol=1e-10)
        sp = SpeciesParams("A", "hard-core", J=1.0, mu=mu, trap_w=(w, 0, 0))
        res = run_chain(MixtureParams(sp), LatticeGeometry((length, 1, 1)),
                        temperature,
                        ChainConfig(seed=seed, therm_sweeps=2000,
                                    meas_sweeps=30000, n_bins=32))
        ff = hardcore_1d_free_fermion(1.0, mu - w * xi**2, temperature)
        pulls = np.abs(res.density[0] - ff.density) / np.maximum(
            res.density_err[0], 1e-6)
        worst = max(worst, float(pulls.max()))
        assert pulls.max() <= 3.0, \
            f"T={temperature}: site pull {pulls.max():.2f} sigma"
    report(2, True, f"L=16 trapped chain vs free fermions at 3 temperatures: "
                    f"worst site pull {worst:.2f} sigma, {time.time() - t0:.0f}s")


# --------------------------------------------------------------- criterion 3
def _occupation_chisquare(species, seed, n_samples=25000, spacing=20):
    g = LatticeGeometry((1, 1, 1))
    wc = WormChain(MixtureParams(species), g, 1.0, seed=seed)
    counts = np.zeros(species.n_max + 1)
    for _ in range(n_samples):
        wc.kernel.run_updates(spacing)
        s = wc.measure_once()
        if s is not None:
            counts[int(round(s["density"][0, 0]))] += 1
    probs = atomic_limit(species.U, np.array([species.mu]), 1.0,
                         n_max=species.n_max).occupation_probs[0]
    expected = counts.sum() * probs
    keep = expected >= 5
    c = np.append(counts[keep], counts[~keep].sum())
    e = np.append(expected[keep], expected[~keep].sum())
    if e[-1] == 0:
        c, e = c[:-1], e[:-1]
    return chisquare(c, e * c.sum() / e.sum())[1]


def test_criterion_3_single_site_exactness():
    t0 = time.time()
    p_soft = _occupation_chisquare(
        SpeciesParams("A", "soft-core", J=1.0, U=2.0, mu=1.0, n_max=5), 63_001)
    p_hard = _occupation_chisquare(
        SpeciesParams("A", "hard-core", J=1.0, mu=0.7), 63_002)
    ok = p_soft > 0.01 and p_hard > 0.01
    report(3, ok, f"grand-canonical occupation chi-squared: soft-core "
                  f"p={p_soft:.3f}, hard-core p={p_hard:.3f}, "
                  f"{time.time() - t0:.0f}s")


# --------------------------------------------------------------- criterion 4
def test_criterion_4_entropy_integrator():
    t0 = time.time()
    g = LatticeGeometry((2, 1, 1))
    hc = SpeciesParams("A", "hard-core", J=1.0, mu=0.3)
    grid = np.logspace(np.log10(0.05), np.log10(10.0), 40)
    results = [ed_thermal(MixtureParams(hc), g, t) for t in grid]
    energies = np.array([r.energy_grand for r in results])
    s_direct = np.array([r.entropy for r in results])
    e0 = ed_thermal(MixtureParams(hc), g, 0.005).energy_grand
    s_eq2, _ = entropy_from_energy(grid, energies, e0)
    window = grid >= 0.2
    rel = np.abs(s_eq2[window] - s_direct[window]) / s_direct[window]
    report(4, rel.max() < 0.01,
           f"Eq.-2 integration of ED E(T), 40 log points: max rel err "
           f"{rel.max():.2%} on T/J in [0.2, 10], {time.time() - t0:.0f}s")


# --------------------------------------------------------------- criterion 5
def test_criterion_5_initial_state_entropies():
    t0 = time.time()
    n, wbar = 3000.0, 0.7
    tc = bose_critical_temperature(n, wbar)
    s_bose = bose_initial_entropy(n, wbar, 0.4 * tc) / n
    closed = 4.0 * ZETA4 / ZETA3 * 0.4**3
    ok_bose = abs(s_bose - closed) < 1e-6
    s_fermi, _ = _trapped_fermi_sn(0.1)
    sommerfeld = np.pi**2 / 10.0
    ok_fermi = abs(s_fermi - sommerfeld) / sommerfeld < 0.05
    report(5, ok_bose and ok_fermi,
           f"S/N(0.4 T_c) = {s_bose:.7f} vs closed form {closed:.7f}; "
           f"Fermi S/N(0.1 T_F) = {s_fermi:.4f} vs Sommerfeld "
           f"{sommerfeld:.4f} ({abs(s_fermi - sommerfeld) / sommerfeld:.1%}), "
           f"{time.time() - t0:.0f}s")


# --------------------------------------------------------------- criterion 6
def test_criterion_6_fermion_band_insulator():
    t0 = time.time()
    a = 532e-9
    j_b = tunneling_from_depth(9.0) * constants.recoil_energy(
        constants.MASS_K40, a)
    trap = tuple(constants.trap_curvature(constants.MASS_K40,
                                          2 * np.pi * f, a) / j_b
                 for f in (40.0, 40.0, 260.0))
    g = LatticeGeometry((32, 32, 32))
    spectra = axis_spectra(g, SpeciesParams("B", "fermion", J=1.0, trap_w=trap))
    n_grid = [2000, 4000, 8000, 12000, 16000, 20000]
    centrals, fps = [], []
    for n in n_grid:
        mu = tune_mu_fermi(spectra, float(n), 1.0)
        _, dens, _ = fermi_observables(spectra, mu, 1.0)
        cd = gaussian_blur(column_density(dens), 4.0)
        fit = fit_profile(cd, GAUSSIAN, (40.0, 40.0, 260.0))
        centrals.append(float(dens[16, 16, 16]))
        fps.append(fit.peak_filling)
    plateau_central = [c for n, c in zip(n_grid, centrals) if n >= 12000]
    ok_central = all(abs(c - 1.0) <= 0.005 for c in plateau_central)
    rise = fps[2] - fps[0]
    late = max(fps[3:]) - min(fps[3:])
    ok_plateau = late < 0.3 * rise
    report(6, ok_central and ok_plateau,
           f"central filling at large N: "
           f"{', '.join(f'{c:.4f}' for c in plateau_central)} (within 0.005); "
           f"f_p rise {rise:.3f} then flattens (late spread {late:.3f}), "
           f"{time.time() - t0:.0f}s")


# --------------------------------------------------------------- criterion 7
def test_criterion_7_fit_pipeline():
    t0 = time.time()
    rng = np.random.default_rng(7)
    worst_clean, worst_blur = 0.0, 0.0
    aspect = (40.0, 40.0, 260.0)
    for _ in range(50):
        fp = rng.uniform(0.2, 1.0)
        sx, sy = rng.uniform(15.0, 40.0, size=2)
        sz = np.sqrt(sx * sy) * 40.0 / 260.0
        truth = synthetic_truth(TF, (256, 256), fp, sx, sy, sz)
        clean = fit_profile(truth, TF, aspect)
        worst_clean = max(worst_clean, abs(clean.peak_filling - fp) / fp)
        blurred = fit_profile(gaussian_blur(truth, 4.0), TF, aspect)
        worst_blur = max(worst_blur, abs(blurred.peak_filling - fp) / fp)
    ok = worst_clean <= 1e-4 and worst_blur <= 0.05
    report(7, ok, f"50 synthetic truths: unblurred worst rel err "
                  f"{worst_clean:.2e} (<=1e-4), blur-4 worst f_p err "
                  f"{worst_blur:.2%} (<=5%), {time.time() - t0:.0f}s")


# --------------------------------------------------------------- criterion 8
def test_criterion_8_stirap_number():
    t0 = time.time()
    geom = StirapGeometry()  # 968 nm / 689 nm at 45 degrees in plane, a = 532
    v_mol = molecular_lattice_depth(20.0, 9.0)
    res = total_excited_population(geom, 0.9, v_mol)
    ok_pop = 0.005 <= res.total_harmonic <= 0.02 \
        and 0.005 <= res.total_numeric <= 0.02
    worst_quad = 0.0
    for k in (0.3, 0.9887, 1.6):
        for alpha in (0.6, 0.9, 1.3):
            sf = harmonic_ground_width(v_mol)
            sg = harmonic_ground_width(alpha * v_mol)
            quad = numeric_band_ratio(k, v_mol, alpha, source="harmonic")
            worst_quad = max(worst_quad,
                             abs(quad - gaussian_band_ratio(k, sf, sg)))
    rep = formula_vs_oracle_report(0.9, v_mol)
    ok = ok_pop and worst_quad <= 1e-8 and rep["spread"] < 1e-10
    report(8, ok,
           f"P_exc formula {res.total_harmonic:.3%}, numeric "
           f"{res.total_numeric:.3%} (in [0.5%, 2%]); quadrature vs Gaussian "
           f"oracle {worst_quad:.1e} (<=1e-8); printed-formula/oracle constant "
           f"{rep['constant']:.4f}, {time.time() - t0:.0f}s")


# --------------------------------------------------------------- criterion 9
def test_criterion_9_stirap_adiabatic_limit():
    t0 = time.time()
    # pulse area = Omega * width = 50x the order-one adiabaticity scale
    pulses = StirapPulses(rabi_peak_up=50.0, rabi_peak_down=50.0, width=1.0,
                          delay=1.2)
    ev = stirap_evolution(pulses, duration=10.0)
    ok = (ev.efficiency >= 0.999 and ev.max_intermediate <= 1e-2
          and ev.norm_error <= 1e-8)
    report(9, ok, f"dark-state transfer: efficiency {ev.efficiency:.5f} "
                  f"(>=0.999), peak intermediate {ev.max_intermediate:.2e} "
                  f"(<=1e-2), norm error {ev.norm_error:.1e} (<=1e-8), "
                  f"{time.time() - t0:.0f}s")


# -------------------------------------------------------------- criterion 10
DESK_8CUBE = dict(n_a=25.0, n_b=60.0, u_on=20.0, j_b=1.5,
                  trap_a=(0.8, 0.8, 0.8), trap_b=(1.0, 1.0, 1.0))


def _desk_mixture(u_ab, mu_a, mu_b):
    a = SpeciesParams("A", "soft-core", J=1.0, U=DESK_8CUBE["u_on"], mu=mu_a,
                      trap_w=DESK_8CUBE["trap_a"], n_max=5)
    b = SpeciesParams("B", "hard-core", J=DESK_8CUBE["j_b"], mu=mu_b,
                      trap_w=DESK_8CUBE["trap_b"])
    return MixtureParams(a, b, u_ab)


def _tune_point(u_ab, temperature, mu_a, mu_b, seed, geometry):
    """Tune both chemical potentials to the desk-scale atom numbers."""
    pilot = ChainConfig(seed=seed, therm_sweeps=120, meas_sweeps=420, n_bins=16)
    for round_idx, (label, target) in enumerate(
            (("A", DESK_8CUBE["n_a"]), ("B", DESK_8CUBE["n_b"]),
             ("A", DESK_8CUBE["n_a"]), ("B", DESK_8CUBE["n_b"]))):
        system = _desk_mixture(u_ab, mu_a, mu_b)
        guess = mu_a if label == "A" else mu_b
        res = tune_mu(system, geometry, temperature, target, species=label,
                      pilot=ChainConfig(seed=pilot.seed + 97 * round_idx,
                                        therm_sweeps=pilot.therm_sweeps,
                                        meas_sweeps=pilot.meas_sweeps,
                                        n_bins=16),
                      tol_rel=0.01, mu_lo=guess - 3.0, mu_hi=guess + 3.0,
                      max_iter=14)
        if label == "A":
            mu_a = res.mu
        else:
            mu_b = res.mu
    return mu_a, mu_b


def _desk_point(args):
    """One (U_AB, T) production point: returns energy, N, and densities."""
    u_ab, temperature, mu_a, mu_b, seed, sweeps = args
    geometry = LatticeGeometry((8, 8, 8))
    mu_a, mu_b = _tune_point(u_ab, temperature, mu_a, mu_b, seed, geometry)
    system = _desk_mixture(u_ab, mu_a, mu_b)
    res = run_chain(system, geometry, temperature,
                    ChainConfig(seed=seed + 1, therm_sweeps=500,
                                meas_sweeps=sweeps, n_bins=16))
    d = res.density[0].reshape(8, 8, 8)
    de = res.density_err[0].reshape(8, 8, 8)
    return {
        "u_ab": u_ab, "T": temperature, "mu_a": mu_a, "mu_b": mu_b,
        "energy": res.energy.mean, "energy_err": res.energy.err,
        "n_a": res.n_total[0].mean, "n_a_err": res.n_total[0].err,
        "n_b": res.n_total[1].mean, "n_b_err": res.n_total[1].err,
        "central": float(d[3:5, 3:5, 3:5].mean()),
        "central_err": float(np.sqrt((de[3:5, 3:5, 3:5] ** 2).sum()) / 8.0),
    }


def _desk_scan(u_ab, temperatures, seed0, sweeps_lo=2400):
    """Warm-started temperature scan at fixed U_AB (one worker's job)."""
    rows = []
    mu_a, mu_b = 11.0, 3.0
    for k, t in enumerate(temperatures):
        sweeps = max(1200, int(sweeps_lo * min(1.0, 0.35 / t + 0.3)))
        row = _desk_point((u_ab, t, mu_a, mu_b, seed0 + 101 * k, sweeps))
        mu_a, mu_b = row["mu_a"], row["mu_b"]
        rows.append(row)
    return rows


@pytest.mark.slow
def test_criterion_10_mixture_trend():
    from concurrent.futures import ProcessPoolExecutor

    t0 = time.time()
    geometry = LatticeGeometry((8, 8, 8))

    # (a) fixed T/J_A = 0.2: central filling ordering at U_AB = -10 vs +10
    with ProcessPoolExecutor(max_workers=2) as pool:
        jobs = [(u, 0.2, 11.0, 3.0, 10_500 + int(u), 2400)
                for u in (-10.0, 10.0)]
        part_a = {row["u_ab"]: row for row in pool.map(_desk_point, jobs)}
    att, rep = part_a[-10.0], part_a[10.0]
    for row in (att, rep):
        assert abs(row["n_a"] - DESK_8CUBE["n_a"]) <= 0.03 * DESK_8CUBE["n_a"] \
            + 3 * row["n_a_err"], f"N_A off target: {row}"
    diff_a = att["central"] - rep["central"]
    sig_a = float(np.hypot(att["central_err"], rep["central_err"]))
    ok_a = diff_a > 3.0 * sig_a

    # (b) entropy matching: T_fin(-40) > T_fin(+40) at equal S_i
    temperatures = np.geomspace(0.25, 16.0, 10)
    with ProcessPoolExecutor(max_workers=2) as pool:
        f_att = pool.submit(_desk_scan, -40.0, temperatures, 20_100)
        f_rep = pool.submit(_desk_scan, 40.0, temperatures, 21_700)
        rows_att, rows_rep = f_att.result(), f_rep.result()

    def curve_of(rows, label):
        e = np.array([r["energy"] for r in rows])
        err = np.array([r["energy_err"] for r in rows])
        n_tot = float(np.mean([r["n_a"] + r["n_b"] for r in rows]))
        return build_curve(label, temperatures, e, err, n_particles=n_tot)

    curve_att = curve_of(rows_att, "U_AB=-40")
    curve_rep = curve_of(rows_rep, "U_AB=+40")
    model = InitialStateModel("fermi", 10_000.0, 1.0)
    ok_b = True
    details = []
    for frac in (0.15, 0.25):
        t_char = model.characteristic_temperature()
        s_pp = model.entropy_per_particle(frac * t_char)
        m_att = match_entropy(s_pp * curve_att.n_particles, curve_att)
        m_rep = match_entropy(s_pp * curve_rep.n_particles, curve_rep)
        gap = m_att.t_fin - m_rep.t_fin
        sig = float(np.hypot(m_att.t_err, m_rep.t_err))
        details.append(f"T_i/T_F={frac}: T_fin(-40)={m_att.t_fin:.3f} vs "
                       f"T_fin(+40)={m_rep.t_fin:.3f} ({gap / max(sig, 1e-9):.1f} sigma)")
        ok_b = ok_b and gap > 3.0 * sig

    report(10, ok_a and ok_b,
           f"(a) central filling -10 vs +10 at T/J=0.2: "
           f"{att['central']:.3f} vs {rep['central']:.3f} "
           f"({diff_a / max(sig_a, 1e-9):.1f} sigma); (b) {'; '.join(details)}; "
           f"{(time.time() - t0) / 60:.0f} min")


# -------------------------------------------------------------- criterion 11
def test_criterion_11_determinism_and_resume(tmp_path):
    import os

    from latmix.qmc import run_chain_resumable
    from latmix.qmc.checkpoint import save_checkpoint
    from latmix.qmc.engine import ChainAccumulator

    t0 = time.time()
    g = LatticeGeometry((2, 2, 1))
    a = SpeciesParams("A", "soft-core", J=1.0, U=6.0, mu=2.0, n_max=4)
    b = SpeciesParams("B", "hard-core", J=0.8, mu=0.3)
    system = MixtureParams(a, b, -4.0)
    cfg = ChainConfig(seed=11_011, therm_sweeps=300, meas_sweeps=3000,
                      n_bins=16)

    merged_1 = merge_results([
        run_chain(system, g, 0.8, ChainConfig(seed=cfg.seed + c,
                                              therm_sweeps=cfg.therm_sweeps,
                                              meas_sweeps=cfg.meas_sweeps,
                                              n_bins=cfg.n_bins))
        for c in range(2)])
    merged_2 = merge_results([
        run_chain(system, g, 0.8, ChainConfig(seed=cfg.seed + c,
                                              therm_sweeps=cfg.therm_sweeps,
                                              meas_sweeps=cfg.meas_sweeps,
                                              n_bins=cfg.n_bins))
        for c in range(2)])
    ok_det = (merged_1.energy.mean == merged_2.energy.mean
              and np.array_equal(merged_1.density, merged_2.density))

    reference = run_chain(system, g, 0.8, cfg)
    path = os.path.join(tmp_path, "c.ckpt")
    chain = WormChain(system, g, 0.8, cfg.seed)
    acc = ChainAccumulator(chain, cfg)
    chain._therm_event_sum = 0
    for _ in range(cfg.therm_sweeps):
        chain.sweep()
        chain._therm_event_sum += chain.kernel.total_events()
    chain.freeze_sweep_size(chain._therm_event_sum / cfg.therm_sweeps)
    for _ in range(1234):
        chain.sweep()
        acc.add(chain.measure_once())
    save_checkpoint(path, chain, acc, "measure", 1234)
    del chain
    resumed = run_chain_resumable(system, g, 0.8, cfg, checkpoint_path=path)
    ok_resume = (resumed.energy.mean == reference.energy.mean
                 and np.array_equal(resumed.density, reference.density))
    report(11, ok_det and ok_resume,
           f"identical seeds merge byte-identically ({ok_det}); kill+resume "
           f"equals uninterrupted ({ok_resume}), {time.time() - t0:.0f}s")
