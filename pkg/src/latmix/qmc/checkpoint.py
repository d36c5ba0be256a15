"""Versioned binary checkpoints for resumable, bit-exact chains.

A chain resumed from a checkpoint produces the identical sample stream as an
uninterrupted run: the snapshot holds the full worldline configuration, RNG
state, frozen sweep size, and every accumulator.
"""

import os
import pickle
import tempfile

from .engine import ChainAccumulator, ChainConfig, WormChain
from .estimators import EstimatorResult

CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, chain: WormChain, acc: ChainAccumulator, phase, index):
    state = {
        "version": CHECKPOINT_VERSION,
        "phase": phase,  # "therm" | "measure"
        "index": index,
        "event_sum": getattr(chain, "_therm_event_sum", 0),
        "sweep_updates": chain._sweep_updates,
        "kernel": chain.kernel.pack_state(),
        "accumulator": acc.state(),
        "seed": chain.seed,
        "temperature": chain.temperature,
    }
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".ckpt.tmp")
    with os.fdopen(fd, "wb") as fh:
        pickle.dump(state, fh, protocol=4)
    os.replace(tmp, path)  # atomic on POSIX


def load_checkpoint(path):
    with open(path, "rb") as fh:
        state = pickle.load(fh)
    if state.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {state.get('version')} != {CHECKPOINT_VERSION}")
    return state


def run_chain_resumable(system, geometry, temperature, config: ChainConfig,
                        checkpoint_path=None, checkpoint_every=0,
                        debug=False) -> EstimatorResult:
    """Like engine.run_chain but periodically snapshots and resumes.

    checkpoint_every counts sweeps during thermalization and measurement
    points afterwards; 0 disables periodic snapshots (still resumes from an
    existing file).
    """
    chain = WormChain(system, geometry, temperature, config.seed,
                      worm_weight=config.worm_weight, debug=debug)
    acc = ChainAccumulator(chain, config)
    phase, index = "therm", 0
    chain._therm_event_sum = 0

    if checkpoint_path and os.path.exists(checkpoint_path):
        state = load_checkpoint(checkpoint_path)
        if state["seed"] != config.seed or state["temperature"] != temperature:
            raise CheckpointError("checkpoint does not match this chain")
        chain.kernel.unpack_state(state["kernel"])
        acc.restore(state["accumulator"])
        chain._sweep_updates = state["sweep_updates"]
        chain._therm_event_sum = state["event_sum"]
        phase, index = state["phase"], state["index"]

    def maybe_save(ph, idx):
        if checkpoint_path and checkpoint_every and idx % checkpoint_every == 0:
            save_checkpoint(checkpoint_path, chain, acc, ph, idx)

    if phase == "therm":
        for k in range(index, config.therm_sweeps):
            chain.sweep()
            chain._therm_event_sum += chain.kernel.total_events()
            if k + 1 < config.therm_sweeps:
                maybe_save("therm", k + 1)
        chain.freeze_sweep_size(chain._therm_event_sum / config.therm_sweeps)
        phase, index = "measure", 0

    n_meas_points = config.meas_sweeps // config.sweeps_per_measure
    for k in range(index, n_meas_points):
        for _ in range(config.sweeps_per_measure):
            chain.sweep()
        acc.add(chain.measure_once())
        if k + 1 < n_meas_points:
            maybe_save("measure", k + 1)

    if checkpoint_path and os.path.exists(checkpoint_path):
        os.remove(checkpoint_path)
    return acc.finalize()
