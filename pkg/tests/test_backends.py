"""The compiled extension and the interpreted source are the same worm code;
for a fixed seed their sample streams must agree bit for bit."""

import importlib.util
import os

import numpy as np
import pytest

import latmix.qmc._kernel as kernel_mod
import latmix.qmc.engine as engine
from latmix.model import LatticeGeometry, MixtureParams, SpeciesParams
from latmix.qmc import ChainConfig, run_chain


def load_pure_kernel():
    src = os.path.join(os.path.dirname(kernel_mod.__file__), "_kernel.py")
    if not os.path.exists(src):
        src = kernel_mod.__file__
    if not src.endswith(".py"):
        pytest.skip("pure source not found next to the extension")
    spec = importlib.util.spec_from_file_location("latmix_kernel_pure", src)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def test_backends_bit_identical():
    pure = load_pure_kernel()
    if kernel_mod.COMPILED and pure.COMPILED:
        pytest.skip("pure fallback unavailable")

    g = LatticeGeometry((2, 2, 1))
    a = SpeciesParams("A", "soft-core", J=1.0, U=6.0, mu=2.0, n_max=4)
    b = SpeciesParams("B", "hard-core", J=0.8, mu=0.3)
    system = MixtureParams(a, b, -4.0)
    cfg = ChainConfig(seed=13, therm_sweeps=150, meas_sweeps=900, n_bins=16)

    res_default = run_chain(system, g, 0.8, cfg)
    original = engine.WormKernel
    try:
        engine.WormKernel = pure.WormKernel
        res_pure = run_chain(system, g, 0.8, cfg)
    finally:
        engine.WormKernel = original

    assert res_pure.energy.mean == res_default.energy.mean
    assert res_pure.energy.err == res_default.energy.err
    assert np.array_equal(res_pure.density, res_default.density)
    assert np.array_equal(res_pure.docc_grid, res_default.docc_grid)
    assert res_pure.n_measurements == res_default.n_measurements


def test_backend_reported():
    assert engine.BACKEND in ("compiled", "pure-python")
    import latmix

    assert latmix.qmc_backend == engine.BACKEND
