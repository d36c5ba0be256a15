"""Run configuration: JSON with sections mirroring the module layout.

All physical constants and unit handling live here; science modules receive
dimensionless parameters with energies in units of the species-A tunneling.
Unknown keys are rejected (typo safety) and every conversion is recorded in
the returned unit report.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

from .. import constants
from ..model.bands import tunneling_from_depth
from ..model.lattice import (HARD_CORE, SOFT_CORE, LatticeGeometry,
                             MixtureParams, SpeciesParams)


class ConfigError(ValueError):
    """Configuration problem; carries the offending key path."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


def _check_keys(section: dict, allowed, path):
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(path, f"unknown keys {sorted(unknown)}; "
                          f"allowed: {sorted(allowed)}")


@dataclass
class RunConfig:
    name: str
    geometry: LatticeGeometry
    system: MixtureParams
    temperatures: list
    u_ab_list: list
    n_target: dict  # per-species label -> target atom number (None = fixed mu)
    chains: int
    therm_sweeps: int
    meas_sweeps: int
    sweeps_per_measure: int
    bins: int
    seed: int
    workers: int
    analysis: dict
    stirap: dict
    initial_state: dict
    output: str
    units: dict = field(default_factory=dict)  # conversion report
    raw: dict = field(default_factory=dict)

    def config_hash(self, extra=None) -> str:
        import hashlib

        payload = {k: self.raw.get(k) for k in sorted(self.raw)}
        if extra is not None:
            payload["__extra__"] = extra
        text = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


_SPECIES_KEYS = {"statistics", "mass", "lattice_depth_er", "j_over_ja", "u_over_ja",
                 "mu_over_ja", "n_max", "trap_hz", "trap_w_over_ja"}


def _parse_species(sec: dict, path: str, label: str, j_a_joule: Optional[float],
                   spacing_m: float, units: dict):
    _check_keys(sec, _SPECIES_KEYS, path)
    statistics = sec.get("statistics", SOFT_CORE if label == "A" else HARD_CORE)
    if statistics not in (SOFT_CORE, HARD_CORE):
        raise ConfigError(path + ".statistics",
                          f"QMC species must be boson statistics, got {statistics!r}")

    mass = sec.get("mass", "Rb87" if label == "A" else "K40")
    if isinstance(mass, str):
        if mass not in constants.ATOM_MASSES:
            raise ConfigError(path + ".mass", f"unknown atom {mass!r}")
        mass_kg = constants.ATOM_MASSES[mass]
    else:
        mass_kg = float(mass) * constants.AMU

    e_r = constants.recoil_energy(mass_kg, spacing_m)

    physical = True
    if "lattice_depth_er" in sec:
        depth = float(sec["lattice_depth_er"])
        if depth <= 1:
            raise ConfigError(path + ".lattice_depth_er", "needs V/E_R > 1")
        j_joule = tunneling_from_depth(depth) * e_r
        units[f"J_{label}/E_R({label})"] = j_joule / e_r
        units[f"V_{label}/E_R"] = depth
    elif "j_over_ja" in sec:
        if label == "A":
            if float(sec["j_over_ja"]) != 1.0:
                raise ConfigError(path + ".j_over_ja",
                                  "J_A is the energy unit, so it must be 1.0 "
                                  "(or give lattice_depth_er instead)")
            j_joule = 1.0  # dimensionless run: no physical anchor
            physical = False
        else:
            if j_a_joule is None:
                raise ConfigError(path + ".j_over_ja",
                                  "species A must define the J_A unit first")
            j_joule = float(sec["j_over_ja"]) * j_a_joule
    else:
        raise ConfigError(path, "need lattice_depth_er or j_over_ja")

    if label == "A":
        j_a_joule = j_joule
        units["physical_units"] = physical and units.get("physical_units", True)
    j_over_ja = j_joule / j_a_joule
    units[f"J_{label}/J_A"] = j_over_ja
    units[f"J_{label}_joule"] = j_joule

    if "trap_hz" in sec and "trap_w_over_ja" in sec:
        raise ConfigError(path, "give trap_hz or trap_w_over_ja, not both")
    if "trap_hz" in sec:
        if not units.get("physical_units", True):
            raise ConfigError(path + ".trap_hz",
                              "trap in Hz needs a physical J_A anchor "
                              "(species A lattice_depth_er)")
        freqs = sec["trap_hz"]
        if len(freqs) != 3 or any(f < 0 for f in freqs):
            raise ConfigError(path + ".trap_hz", "need three nonnegative Hz values")
        trap = tuple(constants.trap_curvature(mass_kg, 2.0 * 3.141592653589793 * f,
                                              spacing_m) / j_a_joule
                     for f in freqs)
        units[f"w_{label}/J_A"] = trap
    else:
        trap = tuple(float(w) for w in sec.get("trap_w_over_ja", (0.0, 0.0, 0.0)))

    sp = SpeciesParams(
        label=label,
        statistics=statistics,
        J=j_over_ja,
        U=float(sec.get("u_over_ja", 0.0)),
        mu=float(sec.get("mu_over_ja", 0.0)),
        trap_w=trap,
        n_max=int(sec.get("n_max", 5)),
    )
    return sp, j_a_joule


_TOP_KEYS = {"name", "system", "schedule", "analysis", "stirap", "initial_state",
             "output"}
_SYSTEM_KEYS = {"geometry", "species_a", "species_b", "u_ab_over_ja"}
_GEOM_KEYS = {"shape", "spacing_nm"}
_SCHEDULE_KEYS = {"temperatures", "u_ab_list", "n_target_a", "n_target_b",
                  "chains", "therm_sweeps", "meas_sweeps", "sweeps_per_measure",
                  "bins", "seed", "workers"}
_ANALYSIS_KEYS = {"blur_width_sites", "blur_is_fwhm", "pixel_sites", "fit_model",
                  "trap_aspect"}
_STIRAP_KEYS = {"lambda_up_nm", "lambda_down_nm", "alpha_ratio", "beam_direction",
                "v_a_recoils", "v_b_recoils"}
_INITIAL_KEYS = {"kind", "n", "omega_bar_over_ja", "t_over_characteristic"}


def parse_config(path_or_dict) -> RunConfig:
    """Load and validate a run configuration (path to JSON, or a dict)."""
    if isinstance(path_or_dict, dict):
        raw = path_or_dict
    else:
        with open(path_or_dict) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(str(path_or_dict), f"invalid JSON: {exc}")

    _check_keys(raw, _TOP_KEYS, "<top>")
    units = {}

    system = raw.get("system", {})
    _check_keys(system, _SYSTEM_KEYS, "system")
    geom_sec = system.get("geometry", {})
    _check_keys(geom_sec, _GEOM_KEYS, "system.geometry")
    shape = geom_sec.get("shape", [4, 4, 4])
    if len(shape) != 3:
        raise ConfigError("system.geometry.shape", "need three extents")
    geometry = LatticeGeometry(tuple(int(x) for x in shape),
                               float(geom_sec.get("spacing_nm", 532.0)))
    spacing_m = geometry.spacing_nm * 1e-9

    if "species_a" not in system:
        raise ConfigError("system.species_a", "required")
    sp_a, j_a_joule = _parse_species(system["species_a"], "system.species_a",
                                     "A", None, spacing_m, units)
    sp_b = None
    if "species_b" in system:
        sp_b, _ = _parse_species(system["species_b"], "system.species_b",
                                 "B", j_a_joule, spacing_m, units)
        if sp_b.statistics != HARD_CORE:
            raise ConfigError("system.species_b.statistics",
                              "species B must be hard-core in the mixture engine")
    u_ab = float(system.get("u_ab_over_ja", 0.0))
    mixture = MixtureParams(sp_a, sp_b, u_ab if sp_b is not None else 0.0)

    sched = raw.get("schedule", {})
    _check_keys(sched, _SCHEDULE_KEYS, "schedule")
    temperatures = [float(t) for t in sched.get("temperatures", [1.0])]
    if not temperatures or any(t <= 0 for t in temperatures):
        raise ConfigError("schedule.temperatures", "need positive temperatures")
    u_ab_list = [float(u) for u in sched.get("u_ab_list", [u_ab])]
    for key in ("therm_sweeps", "meas_sweeps", "sweeps_per_measure", "chains"):
        if key in sched and int(sched[key]) < 1:
            raise ConfigError(f"schedule.{key}", "must be positive")

    analysis = dict(raw.get("analysis", {}))
    _check_keys(analysis, _ANALYSIS_KEYS, "analysis")
    analysis.setdefault("blur_width_sites", 4.0)
    analysis.setdefault("blur_is_fwhm", False)
    analysis.setdefault("pixel_sites", 2)
    analysis.setdefault("fit_model", "thomas-fermi")
    analysis.setdefault("trap_aspect", [40.0, 40.0, 260.0])

    stirap = dict(raw.get("stirap", {}))
    _check_keys(stirap, _STIRAP_KEYS, "stirap")
    stirap.setdefault("lambda_up_nm", 968.0)
    stirap.setdefault("lambda_down_nm", 689.0)
    stirap.setdefault("alpha_ratio", 0.9)
    stirap.setdefault("v_a_recoils", 20.0)
    stirap.setdefault("v_b_recoils", 9.0)

    initial = dict(raw.get("initial_state", {}))
    _check_keys(initial, _INITIAL_KEYS, "initial_state")

    return RunConfig(
        name=str(raw.get("name", "run")),
        geometry=geometry,
        system=mixture,
        temperatures=temperatures,
        u_ab_list=u_ab_list,
        n_target={"A": sched.get("n_target_a"), "B": sched.get("n_target_b")},
        chains=int(sched.get("chains", 2)),
        therm_sweeps=int(sched.get("therm_sweeps", 500)),
        meas_sweeps=int(sched.get("meas_sweeps", 2000)),
        sweeps_per_measure=int(sched.get("sweeps_per_measure", 1)),
        bins=int(sched.get("bins", 32)),
        seed=int(sched.get("seed", 20260808)),
        workers=int(sched.get("workers", 2)),
        analysis=analysis,
        stirap=stirap,
        initial_state=initial,
        output=str(raw.get("output", "runs")),
        units=units,
        raw=raw,
    )
