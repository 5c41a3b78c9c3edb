import numpy as np
import pytest

from phasecd.cd_solvers import SolverConfig, run
from phasecd.core import SolverState, embed, gradient, objective, relative_recovery_error
from phasecd.measurement import GenConfig, make_instance
from phasecd.spectral import spectral_init
from phasecd.wirtinger import DivergenceError, WFConfig, default_step, line_search_coeffs, wf_run, wf_step

from conftest import random_ensemble


def test_config_validation():
    with pytest.raises(ValueError):
        WFConfig(step="armijo")
    with pytest.raises(ValueError):
        WFConfig(step=-1.0)
    with pytest.raises(ValueError):
        WFConfig(max_iters=0)


def test_stationary_point_is_fixed(rng):
    ens, x = random_ensemble(rng, 5, 30)
    for step in ("exact", 1e-3):
        state = SolverState.from_point(ens, embed(x))
        before = state.x.copy()
        wf_step(ens, state, step)
        np.testing.assert_allclose(state.x, before, atol=1e-12)


def test_line_search_coeffs_vs_direct(rng):
    ens, _ = random_ensemble(rng, 4, 20, consistent=False)
    xr = rng.standard_normal(8)
    d = rng.standard_normal(8)
    state = SolverState.from_point(ens, xr)
    c, _ = line_search_coeffs(ens, state, d)
    for t in np.linspace(-1, 1, 11):
        assert c(t) == pytest.approx(objective(ens, xr + t * d), rel=1e-10)


def test_exact_line_search_vs_grid(rng):
    for _ in range(5):
        ens, _ = random_ensemble(rng, 4, 20, consistent=False)
        xr = rng.standard_normal(8)
        g = gradient(ens, xr)
        state = SolverState.from_point(ens, xr)
        wf_step(ens, state, "exact")
        c, _ = line_search_coeffs(ens, SolverState.from_point(ens, xr), -g)
        # bracket by the Cauchy bound of the derivative
        a3, a2, a1, a0 = c.derivative()
        R = 1 + max(abs(a2), abs(a1), abs(a0)) / a3
        t = np.linspace(-R, R, 1_000_001)
        assert state.objective <= np.min(c(t)) + 1e-8 * max(1.0, state.objective)
        assert state.objective == pytest.approx(objective(ens, state.x), rel=1e-10)


def test_gradient_matches_core(rng):
    ens, _ = random_ensemble(rng, 3, 12, consistent=False)
    xr = rng.standard_normal(6)
    mu = 1e-5
    state = SolverState.from_point(ens, xr)
    wf_step(ens, state, mu)
    np.testing.assert_allclose(state.x, xr - mu * gradient(ens, xr), rtol=1e-14)


def test_touches_match_one_cd_cycle():
    ens, x = make_instance(GenConfig(N=8, M=48, seed=1))
    x0 = spectral_init(ens)
    state = SolverState.from_point(ens, embed(x0))
    wf_step(ens, state, "exact")
    assert state.touches == 2 * ens.M * ens.N
    state = SolverState.from_point(ens, embed(x0))
    wf_step(ens, state, default_step(ens, x0))
    assert state.touches == 2 * ens.M * ens.N
    _, t = run(ens, x0, SolverConfig("ccd", max_cycles=1, tol=1e-300))
    assert t.touches == 2 * ens.M * ens.N


def test_optimal_start_terminates():
    ens, x = make_instance(GenConfig(N=8, M=48, seed=1))
    _, trace = wf_run(ens, x)
    assert trace.converged and trace.cycle == [0, 1]


def test_exact_wf_recovers_and_is_monotone():
    ens, x = make_instance(GenConfig(N=16, M=96, seed=4))
    xh, trace = wf_run(ens, spectral_init(ens), x_ref=x)
    assert trace.converged
    assert relative_recovery_error(xh, x) < 1e-5
    f = np.array(trace.objective)
    assert np.all(np.diff(f) <= 1e-12 * f[:-1])


def test_default_fixed_step_descends():
    ens, x = make_instance(GenConfig(N=16, M=96, seed=4))
    x0 = spectral_init(ens)
    _, trace = wf_run(ens, x0, WFConfig(step=None, max_iters=50))
    assert trace.objective[-1] < trace.objective[0]


def test_divergence_guard():
    ens, x = make_instance(GenConfig(N=8, M=48, seed=2))
    x0 = spectral_init(ens)
    with pytest.raises(DivergenceError) as info:
        wf_run(ens, x0, WFConfig(step=1.0, max_iters=500))
    assert info.value.trace is not None
    assert len(info.value.trace) >= 2
