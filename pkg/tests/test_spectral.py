import numpy as np
import pytest

from phasecd.core import MeasurementEnsemble, relative_recovery_error
from phasecd.measurement import GenConfig, make_instance
from phasecd.spectral import SpectralConfig, power_iteration, spectral_init, spectral_matvec

from conftest import random_ensemble


def dense_Y(ens):
    a, b = ens.sampling_vectors, ens.intensities
    return (a.T * b) @ np.conj(a) / ens.M


def test_matvec_matches_dense_operator(rng):
    ens, _ = random_ensemble(rng, 5, 30)
    v = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    np.testing.assert_allclose(spectral_matvec(ens)(v), dense_Y(ens) @ v, rtol=1e-12)
    # Y = (1/M) sum b_m a_m a_m^H
    Y = sum(b * np.outer(a, np.conj(a)) for a, b in zip(ens.sampling_vectors, ens.intensities)) / ens.M
    np.testing.assert_allclose(dense_Y(ens), Y, rtol=1e-12)


def test_scalar_case():
    a = np.array([[1.0], [2j], [0.5]])
    b = np.array([1.0, 3.0, 2.0])
    x0 = spectral_init(MeasurementEnsemble(a, b))
    assert abs(x0[0]) ** 2 == pytest.approx(np.sum(b) / np.sum(np.abs(a) ** 2))


def test_principal_subspace_vs_dense_eigensolver(rng):
    for _ in range(5):
        ens, _ = random_ensemble(rng, 4, 24)
        x0 = spectral_init(ens, SpectralConfig(power_iters=5000, tol=1e-13))
        w, V = np.linalg.eigh(dense_Y(ens))
        u = V[:, -1]
        cos = abs(np.vdot(u, x0)) / np.linalg.norm(x0)
        assert np.sqrt(max(0.0, 1 - cos**2)) < 1e-6


def test_scaling(rng):
    ens, _ = random_ensemble(rng, 6, 40)
    x0 = spectral_init(ens)
    expected = 6 * np.sum(np.abs(ens.intensities)) / np.sum(np.abs(ens.sampling_vectors) ** 2)
    assert np.vdot(x0, x0).real == pytest.approx(expected, rel=1e-12)


def test_rayleigh_quotients_non_decreasing(rng):
    ens, _ = random_ensemble(rng, 8, 48)
    _, info = spectral_init(ens, SpectralConfig(power_iters=100, tol=0.0), return_info=True)
    r = np.array(info["rayleigh"])
    assert np.all(np.diff(r) >= -1e-12 * r[-1])
    assert info["shift"] == 0.0


def test_negative_intensities_use_shift(rng):
    ens, _ = random_ensemble(rng, 4, 30, noise=2.0)
    assert np.any(ens.intensities < 0)
    x0, info = spectral_init(ens, SpectralConfig(power_iters=5000, tol=1e-13), return_info=True)
    assert info["shift"] > 0
    w, V = np.linalg.eigh(dense_Y(ens))
    assert abs(np.vdot(V[:, -1], x0)) / np.linalg.norm(x0) == pytest.approx(1.0, abs=1e-9)


def test_all_zero_intensities_rejected():
    with pytest.raises(ValueError, match="zero"):
        spectral_init(MeasurementEnsemble(np.ones((3, 2)), np.zeros(3)))


def test_power_iteration_on_diagonal_matrix():
    d = np.array([3.0, 1.0, 0.5])
    v, r = power_iteration(lambda v: d * v, np.ones(3), iters=500, tol=1e-12)
    assert abs(v[0]) == pytest.approx(1.0, abs=1e-10)
    assert r[-1] == pytest.approx(3.0, rel=1e-10)


def test_deterministic(rng):
    ens, _ = random_ensemble(rng, 5, 30)
    np.testing.assert_array_equal(spectral_init(ens, SpectralConfig(seed=4)), spectral_init(ens, SpectralConfig(seed=4)))


def _spectral_errors(config=None, n_trials=50):
    errs, dense = [], []
    for seed in range(n_trials):
        ens, x = make_instance(GenConfig(N=32, M=192, seed=seed))
        x0 = spectral_init(ens, config)
        errs.append(relative_recovery_error(x0, x))
        u = np.linalg.eigh(dense_Y(ens))[1][:, -1]
        dense.append(relative_recovery_error(u * np.linalg.norm(x0), x))
    return np.array(errs), np.array(dense)


def test_start_error_matches_dense_estimator():
    errs, dense = _spectral_errors(SpectralConfig(power_iters=5000, tol=1e-13))
    np.testing.assert_allclose(errs, dense, atol=1e-6)
    # better than the trivial start x0 = 0, whose error is exactly 1
    assert np.median(errs) < 1.0


@pytest.mark.xfail(strict=True, reason="plain spectral estimate at M/N=6 has median error ~0.69; "
                                       "see the dense-estimator test above")
def test_informative_start_median_below_half():
    errs, _ = _spectral_errors()
    assert np.max(errs) < 1.0
    assert np.median(errs) < 0.5
