import numpy as np
import pytest

from latmix.imaging import (GAUSSIAN, TF, ColumnDensity, column_density,
                            double_occupancy_fraction, fit_profile,
                            gaussian_blur, pixelate, synthetic_truth)

ASPECT = (40.0, 40.0, 260.0)


def test_column_density_uniform_and_delta():
    cd = column_density(np.ones((5, 5, 7)))
    assert np.all(cd.values == 7.0)
    d3 = np.zeros((5, 5, 3))
    d3[2, 3, 1] = 1.0
    cd = column_density(d3)
    assert cd.values[2, 3] == 1.0
    assert cd.total == pytest.approx(1.0)


def test_column_density_rejects_negative():
    with pytest.raises(ValueError):
        column_density(-np.ones((2, 2, 2)))


def test_blur_identity_and_delta():
    img = np.random.default_rng(1).random((31, 31))
    cd = ColumnDensity(img.copy())
    assert np.array_equal(gaussian_blur(cd, 0.0).values, img)
    delta = np.zeros((61, 61))
    delta[30, 30] = 1.0
    blurred = gaussian_blur(ColumnDensity(delta), 4.0)
    assert blurred.values[30, 30] == pytest.approx(1 / (2 * np.pi * 16), rel=1e-5)
    assert blurred.total == pytest.approx(1.0, abs=1e-12)


def test_blur_commutes_with_translation():
    rng = np.random.default_rng(2)
    img = np.zeros((48, 48))
    img[18:26, 20:28] = rng.random((8, 8))
    b1 = gaussian_blur(ColumnDensity(img), 2.0).values
    shifted = np.roll(img, (3, -2), axis=(0, 1))
    b2 = gaussian_blur(ColumnDensity(shifted), 2.0).values
    assert np.allclose(np.roll(b1, (3, -2), axis=(0, 1)), b2, atol=1e-12)


def test_blur_fwhm_flag():
    delta = np.zeros((61, 61))
    delta[30, 30] = 1.0
    fwhm = gaussian_blur(ColumnDensity(delta), 4.0, width_is_fwhm=True)
    sigma = 4.0 / (2 * np.sqrt(2 * np.log(2)))
    assert fwhm.provenance["blur_sigma_sites"] == pytest.approx(sigma)
    assert fwhm.values[30, 30] > gaussian_blur(ColumnDensity(delta), 4.0).values[30, 30]


def test_pixelate_examples():
    img = np.random.default_rng(3).random((8, 8))
    assert np.array_equal(pixelate(ColumnDensity(img), 1).values, img)
    uniform = ColumnDensity(np.full((8, 8), 2.5))
    assert np.allclose(pixelate(uniform, 2).values, 2.5)
    checker = ColumnDensity((np.indices((8, 8)).sum(axis=0) % 2).astype(float))
    assert np.allclose(pixelate(checker, 2).values, 0.5)
    # flux preserved: mean * area
    p = pixelate(ColumnDensity(img), 2)
    assert p.total == pytest.approx(img.sum(), rel=1e-12)


def test_flux_conserved_through_pipeline():
    rng = np.random.default_rng(4)
    d3 = np.zeros((48, 48, 8))
    d3[14:34, 14:34, :] = rng.random((20, 20, 8))
    cd = column_density(d3)
    blurred = gaussian_blur(cd, 2.0)  # cloud sits > 5 sigma from the frame edge
    pixeled = pixelate(blurred, 2)
    n0 = d3.sum()
    assert cd.total == pytest.approx(n0, rel=1e-12)
    assert blurred.total == pytest.approx(n0, rel=1e-6)
    assert pixeled.total == pytest.approx(blurred.total, rel=1e-12)


def test_tf_fit_exact_recovery():
    # sigma_z consistent with the aspect-ratio inference the fit applies
    sz = np.sqrt(20.0 * 25.0) * 40.0 / 260.0
    truth = synthetic_truth(TF, (128, 128), 0.8, 20.0, 25.0, sz)
    fit = fit_profile(truth, TF, ASPECT)
    assert fit.converged
    assert fit.peak_filling == pytest.approx(0.8, rel=1e-6)
    assert fit.sigma_x == pytest.approx(20.0, rel=1e-6)
    assert fit.sigma_y == pytest.approx(25.0, rel=1e-6)


def test_gaussian_fit_exact_recovery():
    sz = np.sqrt(18.0 * 22.0) * 40.0 / 260.0
    truth = synthetic_truth(GAUSSIAN, (128, 128), 0.55, 18.0, 22.0, sz)
    fit = fit_profile(truth, GAUSSIAN, ASPECT)
    assert fit.peak_filling == pytest.approx(0.55, rel=1e-6)


def test_blurred_recovery_within_tolerance():
    rng = np.random.default_rng(5)
    for _ in range(6):
        fp = rng.uniform(0.2, 1.0)
        sx, sy = rng.uniform(15, 40, size=2)
        sz = np.sqrt(sx * sy) * 40.0 / 260.0
        truth = synthetic_truth(TF, (256, 256), fp, sx, sy, sz)
        fit = fit_profile(gaussian_blur(truth, 4.0), TF, ASPECT)
        assert abs(fit.peak_filling - fp) / fp < 0.05


def test_fit_requires_informative_points():
    tiny = synthetic_truth(TF, (8, 8), 0.5, 2.0, 2.0, 0.4)
    with pytest.raises(ValueError):
        fit_profile(tiny, TF, ASPECT)


def test_fit_off_center_cloud():
    sz = 18.0 * 40.0 / 260.0
    truth = synthetic_truth(TF, (160, 160), 0.6, 18.0, 18.0, sz,
                            center=(7.0, -5.0))
    fit = fit_profile(truth, TF, ASPECT)
    assert fit.center[0] == pytest.approx(7.0, abs=0.01)
    assert fit.center[1] == pytest.approx(-5.0, abs=0.01)
    assert fit.peak_filling == pytest.approx(0.6, rel=1e-5)


def test_double_occupancy_fraction_hardcore_zero():
    from latmix.model import LatticeGeometry, MixtureParams, SpeciesParams
    from latmix.qmc import ChainConfig, run_chain

    g = LatticeGeometry((2, 1, 1))
    hc = SpeciesParams("A", "hard-core", J=1.0, mu=0.5)
    res = run_chain(MixtureParams(hc), g, 1.0,
                    ChainConfig(seed=19, therm_sweeps=300, meas_sweeps=3000,
                                n_bins=16))
    frac, err = double_occupancy_fraction(res)
    assert frac == 0.0
    assert err == 0.0


def test_double_occupancy_fraction_second_shell():
    # atomic limit, T -> 0, U < mu < 2U: every site holds exactly 2 atoms,
    # so all atoms sit on multiply occupied sites
    from latmix.model import LatticeGeometry, MixtureParams, SpeciesParams
    from latmix.qmc import ChainConfig, run_chain

    g = LatticeGeometry((2, 1, 1))
    sc = SpeciesParams("A", "soft-core", J=0.02, U=10.0, mu=15.0, n_max=5)
    res = run_chain(MixtureParams(sc), g, 0.25,
                    ChainConfig(seed=23, therm_sweeps=1500, meas_sweeps=8000,
                                n_bins=16))
    frac, err = double_occupancy_fraction(res)
    assert frac == pytest.approx(1.0, abs=0.01)
