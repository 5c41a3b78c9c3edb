import numpy as np
import pytest

from phasecd.core import (
    REFRESH_EVERY,
    MeasurementEnsemble,
    RunTrace,
    SolverState,
    dist_to_orbit,
    embed,
    gradient,
    is_success,
    objective,
    optimal_phase,
    refresh_cache,
    relative_recovery_error,
    unembed,
)

from conftest import random_ensemble


def scalar(a, b):
    return MeasurementEnsemble([[a]], [b])


# -------------------------------------------------------------- embedding


@pytest.mark.parametrize("x, expected", [
    ([1 + 2j], [1, 2]),
    ([0, 0], [0, 0, 0, 0]),
    ([3 - 1j, 1j], [3, 0, -1, 1]),
])
def test_embed_examples(x, expected):
    np.testing.assert_array_equal(embed(x), expected)


def test_unembed_examples():
    np.testing.assert_array_equal(unembed([1, 2]), [1 + 2j])
    np.testing.assert_array_equal(unembed([0, 0, 0, 0]), [0, 0])


def test_unembed_rejects_odd_length():
    with pytest.raises(ValueError, match="even length"):
        unembed([1.0, 2.0, 3.0])


def test_embed_rejects_nonfinite():
    with pytest.raises(ValueError):
        embed([np.nan])


def test_round_trip(rng):
    for _ in range(100):
        n = rng.integers(1, 20)
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        np.testing.assert_array_equal(unembed(embed(x)), x)
        xr = rng.standard_normal(2 * n)
        np.testing.assert_array_equal(embed(unembed(xr)), xr)


# -------------------------------------------------------------- ensemble


def test_ensemble_is_frozen():
    ens = scalar(1.0, 1.0)
    with pytest.raises(ValueError):
        ens.intensities[0] = 2.0
    with pytest.raises(ValueError):
        ens.cols[0, 0] = 2.0


def test_ensemble_validation():
    with pytest.raises(ValueError, match="intensities"):
        MeasurementEnsemble(np.ones((3, 2)), np.ones(2))
    with pytest.raises(ValueError, match="non-finite"):
        MeasurementEnsemble(np.ones((1, 1)), [np.inf])


def test_products_are_inner_products(rng):
    ens, x = random_ensemble(rng, 5, 7)
    expected = [np.vdot(a, x) for a in ens.sampling_vectors]
    np.testing.assert_allclose(ens.products(x), expected, rtol=1e-13)


# -------------------------------------------------------------- objective


def test_objective_scalar_examples():
    assert objective(scalar(1, 1), embed([1])) == 0.0
    assert objective(scalar(1, 0), embed([1])) == 1.0


def test_objective_term_by_term(rng):
    for _ in range(10):
        ens, _ = random_ensemble(rng, 6, 15, consistent=False)
        xr = rng.standard_normal(12)
        x = unembed(xr)
        direct = sum((abs(np.vdot(a, x)) ** 2 - b) ** 2
                     for a, b in zip(ens.sampling_vectors, ens.intensities))
        assert objective(ens, xr) == pytest.approx(direct, rel=1e-12)
        assert objective(ens, xr) >= 0


def test_objective_real_quadratic_form(rng):
    # |a^H x|^2 = xr^T Abar xr with Abar the real 2N x 2N form of a a^H
    ens, _ = random_ensemble(rng, 5, 5, consistent=False)
    xr = rng.standard_normal(10)
    total = 0.0
    for a, b in zip(ens.sampling_vectors, ens.intensities):
        h = np.outer(a, np.conj(a))
        abar = np.block([[h.real, -h.imag], [h.imag, h.real]])
        total += (xr @ abar @ xr - b) ** 2
    assert objective(ens, xr) == pytest.approx(total, rel=1e-12)


# -------------------------------------------------------------- gradient


def test_gradient_scalar_examples():
    np.testing.assert_array_equal(gradient(scalar(1, 1), embed([1])), [0, 0])
    np.testing.assert_allclose(gradient(scalar(1, 0), embed([1])), [4, 0])


def test_gradient_vs_central_differences(rng):
    h = 1e-5
    for _ in range(20):
        N = int(rng.integers(1, 17))
        M = int(rng.integers(N, 65))
        ens, _ = random_ensemble(rng, N, M, consistent=False)
        xr = rng.standard_normal(2 * N)
        g = gradient(ens, xr)
        fd = np.empty_like(g)
        for i in range(2 * N):
            e = np.zeros(2 * N)
            e[i] = h
            fd[i] = (objective(ens, xr + e) - objective(ens, xr - e)) / (2 * h)
        # components near zero are judged against the gradient scale
        scale = np.maximum(np.abs(g), 1e-3 * np.max(np.abs(g)))
        assert np.max(np.abs(g - fd) / scale) < 1e-5


# -------------------------------------------------------------- cache


def test_refresh_zero_delta_keeps_cache(rng):
    ens, _ = random_ensemble(rng, 4, 12)
    state = SolverState.from_point(ens, rng.standard_normal(8))
    z = state.z.copy()
    refresh_cache(ens, state, 3, 0.0)
    np.testing.assert_array_equal(state.z, z)
    assert state.touches == ens.M


def test_refresh_single_update(rng):
    ens, _ = random_ensemble(rng, 8, 40)
    for i in range(16):
        state = SolverState.from_point(ens, rng.standard_normal(16))
        refresh_cache(ens, state, i, rng.standard_normal())
        assert state.cache_error(ens) < 1e-10
        assert state.objective == pytest.approx(objective(ens, state.x), rel=1e-10)


def test_refresh_drift_over_many_updates(rng):
    ens, _ = random_ensemble(rng, 8, 40)
    state = SolverState.from_point(ens, rng.standard_normal(16))
    for _ in range(REFRESH_EVERY - 1):
        refresh_cache(ens, state, int(rng.integers(16)), 0.1 * rng.standard_normal())
    assert state.since_refresh == REFRESH_EVERY - 1
    assert state.cache_error(ens) < 1e-7
    refresh_cache(ens, state, 0, 0.1)
    assert state.since_refresh == 0
    assert state.refresh_touches == ens.M * ens.N
    assert state.cache_error(ens) < 1e-14


def test_refresh_index_range(rng):
    ens, _ = random_ensemble(rng, 2, 4)
    state = SolverState.from_point(ens, np.zeros(4))
    with pytest.raises(IndexError):
        refresh_cache(ens, state, 4, 1.0)


def test_check_cache_flags_stale_state(rng):
    ens, _ = random_ensemble(rng, 3, 9)
    state = SolverState.from_point(ens, rng.standard_normal(6))
    state.x[0] += 1.0
    with pytest.raises(AssertionError, match="stale"):
        state.check_cache(ens)


# -------------------------------------------------------------- metrics


def test_dist_to_orbit_examples(rng):
    x = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    assert dist_to_orbit(1j * x, x) == pytest.approx(0.0, abs=1e-7)
    assert dist_to_orbit([0.0], [1.0]) == 1.0


def test_dist_to_orbit_vs_phase_grid(rng):
    phis = np.linspace(0.0, 2 * np.pi, 1_000_000, endpoint=False)
    for _ in range(3):
        z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        # ||z - e^{j phi} x||^2 = |z|^2 + |x|^2 - 2 Re(e^{j phi} z^H x)
        c = np.vdot(z, x)
        d2 = np.vdot(z, z).real + np.vdot(x, x).real - 2 * (np.cos(phis) * c.real - np.sin(phis) * c.imag)
        k = int(np.argmin(d2))
        assert dist_to_orbit(z, x) == pytest.approx(np.sqrt(d2[k]), abs=1e-5)
        phi = optimal_phase(z, x)
        assert np.linalg.norm(z - np.exp(1j * phi) * x) == pytest.approx(dist_to_orbit(z, x), abs=1e-10)


def test_relative_error_examples(rng):
    x = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    assert relative_recovery_error(np.exp(0.7j) * x, x) < 1e-28
    assert relative_recovery_error(np.zeros(6), x) == pytest.approx(1.0)
    assert relative_recovery_error(1.001 * x, x) == pytest.approx(1e-6, rel=1e-6)
    with pytest.raises(ValueError):
        relative_recovery_error(x, np.zeros(6))
    assert is_success(9e-6) and not is_success(1e-5)


# -------------------------------------------------------------- trace


def test_trace_csv_round_trip(tmp_path):
    t = RunTrace()
    t.append(0, 10.0, 0.5)
    t.append(1, 1.0 / 3.0, 1e-20, 0.25)
    path = tmp_path / "t.csv"
    t.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "cycle,objective,rel_error,isi"
    assert lines[1] == "0,10,0.5,"
    back = RunTrace.from_csv(path)
    assert back.objective == t.objective
    assert back.rel_error == t.rel_error
    assert np.isnan(back.isi[0]) and back.isi[1] == 0.25
    assert t.first_cycle_below(1.0) == 1
    assert t.first_cycle_below(0.1) is None
    assert t.is_monotone()
