"""Append-only results store: every record is keyed by a config hash.

Records are JSON (+ .npz beside it for arrays); re-running a completed stage
with the same hash is a no-op and nothing is ever overwritten.  Writes go
through a temp file and an atomic rename.
"""

import json
import os
import tempfile

import numpy as np

from ..qmc.estimators import EstimatorResult, Obs


class ResultsStore:
    def __init__(self, root: str):
        self.root = root
        os.makedirs(root, exist_ok=True)

    def _paths(self, stage: str, key: str):
        d = os.path.join(self.root, stage)
        return os.path.join(d, f"{key}.json"), os.path.join(d, f"{key}.npz")

    def has(self, stage: str, key: str) -> bool:
        return os.path.exists(self._paths(stage, key)[0])

    def put(self, stage: str, key: str, record: dict, arrays: dict = None) -> bool:
        """Write a record; returns False (no-op) if the key already exists."""
        jpath, npath = self._paths(stage, key)
        if os.path.exists(jpath):
            return False
        os.makedirs(os.path.dirname(jpath), exist_ok=True)
        if arrays:
            fd, tmp = tempfile.mkstemp(dir=os.path.dirname(npath), suffix=".tmp.npz")
            os.close(fd)
            np.savez_compressed(tmp, **arrays)
            os.replace(tmp, npath)
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(jpath), suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(record, fh, indent=1, sort_keys=True, default=str)
        os.replace(tmp, jpath)
        return True

    def get(self, stage: str, key: str):
        jpath, npath = self._paths(stage, key)
        if not os.path.exists(jpath):
            raise KeyError(f"{stage}/{key} not in store")
        with open(jpath) as fh:
            record = json.load(fh)
        arrays = {}
        if os.path.exists(npath):
            with np.load(npath) as data:
                arrays = {k: data[k].copy() for k in data.files}
        return record, arrays

    def keys(self, stage: str, suffix: str = ".json"):
        d = os.path.join(self.root, stage)
        if not os.path.isdir(d):
            return []
        return sorted(f[: -len(suffix)] for f in os.listdir(d)
                      if f.endswith(suffix))

    def put_text(self, stage: str, key: str, suffix: str, text: str) -> str:
        d = os.path.join(self.root, stage)
        os.makedirs(d, exist_ok=True)
        path = os.path.join(d, f"{key}{suffix}")
        if os.path.exists(path):
            return path
        fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
        return path


def _obs_to_dict(obs: Obs):
    return {"mean": obs.mean, "err": obs.err, "tau_int": obs.tau_int}


def _obs_from_dict(d):
    return Obs(d["mean"], d["err"], d.get("tau_int", 0.5))


def estimator_to_record(res: EstimatorResult):
    record = {
        "temperature": res.temperature,
        "n_measurements": res.n_measurements,
        "n_skipped": res.n_skipped,
        "bins_ok": res.bins_ok,
        "seed": res.seed,
        "move_stats": res.move_stats,
        "meta": res.meta,
        "scalars": {k: _obs_to_dict(v) for k, v in res.scalars().items()},
    }
    arrays = {
        "density": res.density,
        "density_err": res.density_err,
        "docc_grid": res.docc_grid,
        "docc_grid_err": res.docc_grid_err,
    }
    return record, arrays


def estimator_from_record(record, arrays) -> EstimatorResult:
    sc = {k: _obs_from_dict(v) for k, v in record["scalars"].items()}
    n_total = []
    k = 0
    while f"n_total_{k}" in sc:
        n_total.append(sc[f"n_total_{k}"])
        k += 1
    return EstimatorResult(
        temperature=record["temperature"],
        n_measurements=record["n_measurements"],
        n_skipped=record["n_skipped"],
        bins_ok=record["bins_ok"],
        energy=sc["energy"],
        energy_grand=sc["energy_grand"],
        kinetic=sc["kinetic"],
        potential=sc["potential"],
        interaction=sc["interaction"],
        n_total=n_total,
        double_occupancy_total=sc["double_occupancy_total"],
        multi_fraction=sc["multi_fraction"],
        density=arrays["density"],
        density_err=arrays["density_err"],
        docc_grid=arrays["docc_grid"],
        docc_grid_err=arrays["docc_grid_err"],
        seed=record.get("seed"),
        move_stats=record.get("move_stats"),
        meta=record.get("meta", {}),
    )
