"""Command-line interface.

Subcommands: validate, hubbard, qmc, scan, fermi, match, analyze, stirap,
export.  Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

import argparse
import json
import os
import sys

import numpy as np


def _load_config(args):
    from .config import parse_config

    if not args.config:
        raise SystemExit("a --config file is required for this subcommand")
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.output = args.out
    return cfg


def cmd_validate(args):
    """Quick oracle self-checks: ED limits, mapping, and a short QMC chain."""
    from ..model import LatticeGeometry, MixtureParams, SpeciesParams
    from ..oracle import atomic_limit, ed_thermal, hardcore_1d_free_fermion
    from ..qmc import ChainConfig, run_chain

    g2 = LatticeGeometry((2, 1, 1))
    hc = SpeciesParams("A", "hard-core", J=1.0)
    r = ed_thermal(MixtureParams(hc), g2, 1.0, fixed_n=(1,))
    ok1 = abs(r.energy - (-np.tanh(1.0))) < 1e-12
    print(f"ED two-level energy: {'ok' if ok1 else 'FAIL'}")

    soft = SpeciesParams("A", "soft-core", J=1e-9, U=10.0, mu=5.0, n_max=5)
    r_ed = ed_thermal(MixtureParams(soft), g2, 1.0)
    r_at = atomic_limit(10.0, np.array([5.0, 5.0]), 1.0, n_max=5)
    ok2 = np.max(np.abs(r_ed.density[0] - r_at.density)) < 1e-8
    print(f"atomic limit vs ED(J->0): {'ok' if ok2 else 'FAIL'}")

    ff = hardcore_1d_free_fermion(1.0, np.zeros(2), 1.0)
    ok3 = np.allclose(ff.levels, [-1.0, 1.0])
    print(f"free-fermion two-site levels: {'ok' if ok3 else 'FAIL'}")

    hcmu = SpeciesParams("A", "hard-core", J=1.0, mu=0.3)
    res = run_chain(MixtureParams(hcmu), g2, 1.0,
                    ChainConfig(seed=args.seed or 1, therm_sweeps=500,
                                meas_sweeps=6000, n_bins=16))
    ed = ed_thermal(MixtureParams(hcmu), g2, 1.0)
    pull = abs(res.energy.mean - ed.energy) / res.energy.err
    print(f"QMC vs ED (2 sites): pull {pull:.2f} sigma "
          f"{'ok' if pull < 4 else 'FAIL'}")
    return 0 if all([ok1, ok2, ok3, pull < 4]) else 3


def cmd_hubbard(args):
    from ..model.bands import band_structure, tunneling_from_depth

    for v in args.depth:
        bs = band_structure(v)
        j = tunneling_from_depth(v)
        print(f"V/E_R = {v:6.2f}:  J/E_R = {j:.6e}   "
              f"gap(0-1)/E_R = {bs.gap(0, 1):.4f}")
    return 0


def cmd_qmc(args):
    from ..qmc import ChainConfig, run_chain

    cfg = _load_config(args)
    t = cfg.temperatures[0]
    chain = ChainConfig(seed=cfg.seed, therm_sweeps=cfg.therm_sweeps,
                        meas_sweeps=cfg.meas_sweeps,
                        sweeps_per_measure=cfg.sweeps_per_measure,
                        n_bins=cfg.bins)
    res = run_chain(cfg.system, cfg.geometry, t, chain)
    out = {name: {"mean": o.mean, "err": o.err}
           for name, o in res.scalars().items()}
    out["temperature"] = t
    out["n_measurements"] = res.n_measurements
    print(json.dumps(out, indent=1, sort_keys=True))
    return 0


def cmd_scan(args):
    from .orchestrate import orchestrate

    cfg = _load_config(args)
    store = orchestrate(cfg, resume=args.resume,
                        stages=("scan", "match", "analyze"))
    print(f"store populated at {store.root}")
    return 0


def cmd_fermi(args):
    from ..fermions import axis_spectra, fermi_observables, tune_mu_fermi

    cfg = _load_config(args)
    sp = cfg.system.species_b or cfg.system.species_a
    spectra = axis_spectra(cfg.geometry, sp)
    t = cfg.temperatures[0]
    n_target = cfg.n_target.get("B") or cfg.n_target.get("A")
    if n_target is None:
        raise SystemExit("schedule.n_target_b (or _a) required for fermi")
    mu = tune_mu_fermi(spectra, float(n_target), t)
    thermo, density, column = fermi_observables(spectra, mu, t)
    center = tuple(s // 2 for s in cfg.geometry.shape)
    print(json.dumps({
        "mu": mu, "T": t, "N": thermo.n_total, "S": thermo.entropy,
        "S_per_N": thermo.entropy / thermo.n_total,
        "central_filling": float(density[center]),
    }, indent=1))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "fermi_column.txt")
        np.savetxt(path, column, header=f"shape {column.shape}  N={thermo.n_total}")
        print(f"column density written to {path}")
    return 0


def cmd_match(args):
    from .orchestrate import match_stage
    from .store import ResultsStore

    cfg = _load_config(args)
    store = ResultsStore(os.path.join(cfg.output, cfg.name))
    rows = match_stage(cfg, store)
    for row in rows:
        print(f"U_AB={row['u_ab']:+7.2f}  T_i={row['t_init']:.4f}  "
              f"S_i={row['s_init']:.3f}  T_fin={row['t_fin']:.4f} "
              f"+- {row['t_fin_err']:.4f}")
    return 0


def cmd_analyze(args):
    from .orchestrate import analyze_stage
    from .store import ResultsStore

    cfg = _load_config(args)
    store = ResultsStore(os.path.join(cfg.output, cfg.name))
    for u_ab in cfg.u_ab_list:
        for t in cfg.temperatures:
            rec = analyze_stage(cfg, store, u_ab, t)
            fit = rec.get("fit", {})
            fp = fit.get("peak_filling")
            print(f"U_AB={u_ab:+7.2f} T={t:6.3f}: central={rec['central_filling']:.4f}"
                  f"  f_p={fp if fp is None else f'{fp:.4f}'}")
    return 0


def cmd_stirap(args):
    from ..stirap import (StirapGeometry, formula_vs_oracle_report,
                          molecular_lattice_depth, total_excited_population)

    cfg = _load_config(args) if args.config else None
    if cfg is not None:
        st = cfg.stirap
        geom = StirapGeometry(st["lambda_up_nm"], st["lambda_down_nm"],
                              st.get("beam_direction"),
                              cfg.geometry.spacing_nm)
        alpha = st["alpha_ratio"]
        vmol = molecular_lattice_depth(st["v_a_recoils"], st["v_b_recoils"],
                                       spacing_nm=cfg.geometry.spacing_nm)
    else:
        geom, alpha, vmol = StirapGeometry(), 0.9, molecular_lattice_depth()
    res = total_excited_population(geom, alpha, vmol)
    rep = formula_vs_oracle_report(alpha, vmol)
    out = {
        "k_xi_a": list(res.k_xi_a),
        "v_mol_over_er": list(res.v_over_er),
        "lamb_dicke": list(res.lamb_dicke),
        "p_per_axis_formula": list(res.p_harmonic),
        "p_per_axis_numeric": list(res.p_numeric),
        "total_excited_formula": res.total_harmonic,
        "total_excited_numeric": res.total_numeric,
        "formula_over_oracle_constant": rep["constant"],
        "valid": res.valid,
    }
    print(json.dumps(out, indent=1))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "band_transfer.json"), "w") as fh:
            json.dump(out, fh, indent=1)
        # Lamb-Dicke map over depth and polarizability
        rows = ["# V_over_ER,alpha,total_excited_formula,lamb_dicke_x"]
        for v in np.linspace(10, 80, 15):
            for al in np.linspace(0.5, 1.5, 11):
                r = total_excited_population(geom, al, v, method="formula")
                rows.append(f"{v:.3f},{al:.3f},{r.total_harmonic:.6e},"
                            f"{r.lamb_dicke[0]:.4f}")
        with open(os.path.join(args.out, "lamb_dicke_map.csv"), "w") as fh:
            fh.write("\n".join(rows) + "\n")
        print(f"wrote band_transfer.json and lamb_dicke_map.csv to {args.out}")
    return 0


def cmd_export(args):
    from .store import ResultsStore

    cfg = _load_config(args)
    store = ResultsStore(os.path.join(cfg.output, cfg.name))
    what = args.what
    stage_map = {"thermo": "thermo", "fits": "fits", "stirap": "stirap",
                 "profiles": "fits"}
    stage = stage_map[what]
    keys = store.keys(stage, suffix=".csv" if what == "thermo" else ".json")
    out_dir = args.out or os.path.join(store.root, "export")
    os.makedirs(out_dir, exist_ok=True)
    if not keys:
        path = os.path.join(out_dir, f"{what}.csv")
        with open(path, "w") as fh:
            fh.write(f"# empty export: no {stage} records\n")
        print(f"no records; wrote header-only {path}")
        return 0
    written = []
    for key in keys:
        if what == "profiles":
            rec, arrays = store.get(stage, key)
            path = os.path.join(out_dir, f"profile_{key}.txt")
            np.savetxt(path, arrays["column"],
                       header=f"shape {arrays['column'].shape} "
                              f"u_ab {rec.get('u_ab')} T {rec.get('T')}")
            written.append(path)
        elif what == "thermo":
            src = os.path.join(store.root, "thermo", f"{key}.csv")
            if os.path.exists(src):
                dst = os.path.join(out_dir, f"thermo_{key}.csv")
                with open(src) as f_in, open(dst, "w") as f_out:
                    f_out.write(f_in.read())
                written.append(dst)
        else:
            rec, _ = store.get(stage, key)
            path = os.path.join(out_dir, f"{what}_{key}.json")
            with open(path, "w") as fh:
                json.dump(rec, fh, indent=1, sort_keys=True)
            written.append(path)
    print(f"exported {len(written)} file(s) to {out_dir}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="latmix",
                                description=__doc__.splitlines()[0])
    p.add_argument("--config", help="path to the JSON run configuration")
    p.add_argument("--seed", type=int, help="override schedule.seed")
    p.add_argument("--workers", type=int, help="worker pool size")
    p.add_argument("--resume", action="store_true", default=True,
                   help="reuse completed records (default)")
    p.add_argument("--out", help="output directory override")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", help="oracle self-checks")
    ph = sub.add_parser("hubbard", help="lattice depth -> tunneling table")
    ph.add_argument("depth", nargs="+", type=float, help="V/E_R values")
    sub.add_parser("qmc", help="single QMC run from a config")
    sub.add_parser("scan", help="full (T, U_AB) pipeline")
    sub.add_parser("fermi", help="species-B exact solver")
    sub.add_parser("match", help="entropy matching -> T_fin table")
    sub.add_parser("analyze", help="imaging and fits of stored densities")
    sub.add_parser("stirap", help="band-transfer numbers and maps")
    pe = sub.add_parser("export", help="export stored records")
    pe.add_argument("what", choices=["thermo", "fits", "stirap", "profiles"])
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {
        "validate": cmd_validate, "hubbard": cmd_hubbard, "qmc": cmd_qmc,
        "scan": cmd_scan, "fermi": cmd_fermi, "match": cmd_match,
        "analyze": cmd_analyze, "stirap": cmd_stirap, "export": cmd_export,
    }
    from .config import ConfigError
    from .orchestrate import StageFailure

    try:
        return handlers[args.command](args)
    except (ConfigError, SystemExit) as exc:
        if isinstance(exc, SystemExit) and not isinstance(exc.code, str) \
                and exc.code in (0, None):
            return 0
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except StageFailure as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # any stage-level error maps to exit code 3
        print(f"stage failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
