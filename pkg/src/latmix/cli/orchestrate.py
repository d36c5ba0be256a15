"""Run orchestration: mu tuning, parallel chains, merging, thermo curves,
entropy matching, and density analysis.

Every stage writes hash-keyed records into the append-only store, so the
pipeline is idempotent and resumable: rerunning skips completed work and the
merged results of an interrupted-then-resumed scan are byte-identical to an
uninterrupted one (chains are independently seeded and deterministic).
"""

import json
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..imaging import column_density, fit_profile, gaussian_blur, pixelate
from ..model.lattice import MixtureParams
from ..qmc.engine import ChainConfig, run_chain
from ..qmc.estimators import merge_results
from ..qmc.tuning import tune_mu
from ..thermo import InitialStateModel, build_curve, match_entropy
from .config import RunConfig
from .store import ResultsStore, estimator_from_record, estimator_to_record


class StageFailure(RuntimeError):
    pass


def _point_key(config: RunConfig, u_ab, temperature, chain=None):
    extra = {"u_ab": u_ab, "T": temperature}
    if chain is not None:
        extra["chain"] = chain
    return config.config_hash(extra)


def _system_at(config: RunConfig, u_ab, mu_a=None, mu_b=None) -> MixtureParams:
    system = config.system
    if system.species_b is not None:
        system = MixtureParams(system.species_a, system.species_b, u_ab)
    if mu_a is not None or mu_b is not None:
        system = system.with_mu(mu_a if mu_a is not None else system.species_a.mu,
                                mu_b)
    return system


def tune_stage(config: RunConfig, store: ResultsStore, u_ab, temperature):
    """Tune chemical potentials to the target atom numbers at one point."""
    key = _point_key(config, u_ab, temperature)
    if store.has("tune", key):
        rec, _ = store.get("tune", key)
        return rec["mu_a"], rec["mu_b"]
    pilot = ChainConfig(seed=config.seed + 7919,
                        therm_sweeps=max(100, config.therm_sweeps // 4),
                        meas_sweeps=max(400, config.meas_sweeps // 8),
                        n_bins=16)
    mu_a = config.system.species_a.mu
    mu_b = config.system.species_b.mu if config.system.species_b else None
    system = _system_at(config, u_ab, mu_a, mu_b)
    rounds = 1 if config.n_target["B"] is None or mu_b is None else 2
    for _ in range(rounds):
        if config.n_target["A"] is not None:
            res = tune_mu(system, config.geometry, temperature,
                          float(config.n_target["A"]), species="A", pilot=pilot)
            mu_a = res.mu
            system = _system_at(config, u_ab, mu_a, mu_b)
        if config.n_target["B"] is not None and mu_b is not None:
            res = tune_mu(system, config.geometry, temperature,
                          float(config.n_target["B"]), species="B", pilot=pilot)
            mu_b = res.mu
            system = _system_at(config, u_ab, mu_a, mu_b)
    store.put("tune", key, {"u_ab": u_ab, "T": temperature,
                            "mu_a": mu_a, "mu_b": mu_b,
                            "config_hash": config.config_hash()})
    return mu_a, mu_b


def _chain_task(args):
    config, u_ab, temperature, chain_idx, mu_a, mu_b = args
    system = _system_at(config, u_ab, mu_a, mu_b)
    cfg = ChainConfig(seed=config.seed + chain_idx,
                      therm_sweeps=config.therm_sweeps,
                      meas_sweeps=config.meas_sweeps,
                      sweeps_per_measure=config.sweeps_per_measure,
                      n_bins=config.bins)
    return run_chain(system, config.geometry, temperature, cfg)


def qmc_stage(config: RunConfig, store: ResultsStore, u_ab, temperature,
              executor=None):
    """All chains of one (U_AB, T) point, merged by inverse variance."""
    merged_key = _point_key(config, u_ab, temperature)
    if store.has("merged", merged_key):
        rec, arrays = store.get("merged", merged_key)
        return estimator_from_record(rec, arrays)

    mu_a, mu_b = tune_stage(config, store, u_ab, temperature)
    tasks, pending = [], []
    for c in range(config.chains):
        key = _point_key(config, u_ab, temperature, chain=c)
        if store.has("chains", key):
            rec, arrays = store.get("chains", key)
            tasks.append(estimator_from_record(rec, arrays))
        else:
            pending.append((c, key, (config, u_ab, temperature, c, mu_a, mu_b)))
    if pending:
        if executor is None:
            fresh = [_chain_task(args) for _, _, args in pending]
        else:
            fresh = list(executor.map(_chain_task,
                                      [args for _, _, args in pending]))
        for (c, key, _), res in zip(pending, fresh):
            rec, arrays = estimator_to_record(res)
            rec.update({"u_ab": u_ab, "T": temperature, "chain": c,
                        "mu_a": mu_a, "mu_b": mu_b,
                        "config_hash": config.config_hash()})
            store.put("chains", key, rec, arrays)
            tasks.append(res)
    tasks.sort(key=lambda r: r.seed if r.seed is not None else 0)
    merged = merge_results(tasks)
    rec, arrays = estimator_to_record(merged)
    rec.update({"u_ab": u_ab, "T": temperature, "mu_a": mu_a, "mu_b": mu_b,
                "config_hash": config.config_hash()})
    store.put("merged", merged_key, rec, arrays)
    return merged


def thermo_stage(config: RunConfig, store: ResultsStore, u_ab, executor=None):
    """Energy curve over the temperature grid at fixed N -> ThermoCurve."""
    key = config.config_hash({"u_ab": u_ab, "stage": "thermo"})
    results = [qmc_stage(config, store, u_ab, t, executor)
               for t in sorted(config.temperatures)]
    temps = np.array(sorted(config.temperatures))
    e = np.array([r.energy.mean for r in results])
    err = np.array([r.energy.err for r in results])
    n_tot = float(np.mean([sum(o.mean for o in r.n_total) for r in results]))
    curve = build_curve(f"{config.name} U_AB={u_ab}", temps, e, err,
                        n_particles=n_tot,
                        meta={"u_ab": u_ab, "config_hash": config.config_hash(),
                              "seeds": f"{config.seed}+0..{config.chains - 1}"})
    store.put_text("thermo", key, ".csv", curve.to_csv())
    return curve


def match_stage(config: RunConfig, store: ResultsStore, executor=None):
    """T_fin(U_AB, T_i) table via entropy matching."""
    init = config.initial_state
    if not init:
        raise StageFailure("initial_state section required for matching")
    model = InitialStateModel(init["kind"], float(init["n"]),
                              float(init["omega_bar_over_ja"]))
    t_char = model.characteristic_temperature()
    rows = []
    for u_ab in config.u_ab_list:
        curve = thermo_stage(config, store, u_ab, executor)
        for frac in init.get("t_over_characteristic", [0.1]):
            t_i = float(frac) * t_char
            # per-particle matching: S_i/N_i = S_lattice/N_lattice (the paper's
            # S/N axes); robust at desk scale where lattice atom numbers are small
            s_i = model.entropy_per_particle(t_i) * curve.n_particles
            m = match_entropy(s_i, curve)
            rows.append({"u_ab": u_ab, "t_init": t_i, "t_init_frac": frac,
                         "s_init_per_particle": s_i / curve.n_particles,
                         "s_init": s_i, "t_fin": m.t_fin, "t_fin_err": m.t_err,
                         "regularized": m.regularized})
    key = config.config_hash({"stage": "match"})
    store.put("match", key, {"rows": rows, "kind": init["kind"],
                             "t_char": t_char,
                             "config_hash": config.config_hash()})
    return rows


def analyze_stage(config: RunConfig, store: ResultsStore, u_ab, temperature,
                  executor=None):
    """Synthetic imaging of the merged density: column, blur, pixel, fit."""
    merged = qmc_stage(config, store, u_ab, temperature, executor)
    shape = config.geometry.shape
    dens3d = merged.density[0].reshape(shape)
    cd = column_density(dens3d, provenance={"u_ab": u_ab, "T": temperature})
    blurred = gaussian_blur(cd, config.analysis["blur_width_sites"],
                            config.analysis["blur_is_fwhm"])
    pixeled = pixelate(blurred, int(config.analysis["pixel_sites"]))
    record = {"u_ab": u_ab, "T": temperature,
              "config_hash": config.config_hash(),
              "central_filling": float(dens3d[shape[0] // 2, shape[1] // 2,
                                              shape[2] // 2]),
              "n_total": sum(o.mean for o in merged.n_total)}
    try:
        fit = fit_profile(pixeled, config.analysis["fit_model"],
                          tuple(config.analysis["trap_aspect"]))
        record["fit"] = {
            "model": fit.model, "amplitude": fit.amplitude,
            "sigma_x": fit.sigma_x, "sigma_y": fit.sigma_y,
            "sigma_z": fit.sigma_z, "peak_filling": fit.peak_filling,
            "residual_norm": fit.residual_norm, "converged": fit.converged,
        }
    except ValueError as exc:
        record["fit"] = {"skipped": str(exc)}
    key = _point_key(config, u_ab, temperature)
    store.put("fits", key, record,
              {"column": cd.values, "blurred": blurred.values,
               "pixeled": pixeled.values})
    return record


def orchestrate(config: RunConfig, resume: bool = True,
                stages=("scan", "match", "analyze")) -> ResultsStore:
    """Dependency-ordered pipeline over the full (T, U_AB) grid."""
    store = ResultsStore(os.path.join(config.output, config.name))
    if not resume:
        # append-only store: refusing to delete, a fresh name is required
        if any(store.keys(s) for s in ("chains", "merged", "fits", "match")):
            raise StageFailure(
                "store already populated; rerun with resume or a new name")
    failures = []
    with ProcessPoolExecutor(max_workers=config.workers) as executor:
        for u_ab in config.u_ab_list:
            for t in config.temperatures:
                try:
                    qmc_stage(config, store, u_ab, t, executor)
                except Exception as exc:  # independent branches continue
                    failures.append((u_ab, t, str(exc)))
        if "match" in stages and config.initial_state:
            try:
                match_stage(config, store, executor)
            except Exception as exc:
                failures.append(("match", None, str(exc)))
        if "analyze" in stages:
            for u_ab in config.u_ab_list:
                for t in config.temperatures:
                    try:
                        analyze_stage(config, store, u_ab, t, executor)
                    except Exception as exc:
                        failures.append((u_ab, t, f"analyze: {exc}"))
    if failures:
        store.put("failures", config.config_hash({"stage": "failures"}),
                  {"failures": failures})
        raise StageFailure(f"{len(failures)} stage(s) failed: {failures[:3]}")
    return store
