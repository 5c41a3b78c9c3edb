"""Wirtinger-flow (full-gradient) baseline.

Two step policies: a fixed step ``mu`` and an exact line search along the
negative gradient. Along any fixed direction the objective is a quartic in
the step length, so the line search reuses the quartic minimiser.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .cd_solvers import default_tol
from .core import (
    MeasurementEnsemble,
    RunTrace,
    SolverState,
    _gradient_from_products,
    embed,
    relative_recovery_error,
    unembed,
)
from .scalar_min import minimize_quartic, quartic_from_quadratics

__all__ = ["WFConfig", "DivergenceError", "default_step", "line_search_coeffs", "wf_step", "wf_run"]

#: consecutive objective increases that abort a fixed-step run
DIVERGENCE_PATIENCE = 10


class DivergenceError(RuntimeError):
    """Fixed-step run whose objective kept increasing; ``trace`` holds the partial run."""

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


@dataclass
class WFConfig:
    """``step`` is ``"exact"`` or a positive float; ``None`` picks the default fixed step."""

    step: Union[str, float, None] = "exact"
    tol: Optional[float] = None
    max_iters: int = 1000
    trace_every: int = 1

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    def validate(self) -> list:
        errors = []
        if isinstance(self.step, str):
            if self.step != "exact":
                errors.append(f"step must be 'exact' or a positive number (got {self.step!r})")
        elif self.step is not None and not float(self.step) > 0:
            errors.append(f"step must be positive (got {self.step})")
        if self.tol is not None and not self.tol > 0:
            errors.append(f"tol must be > 0 (got {self.tol})")
        if int(self.max_iters) < 1:
            errors.append(f"max_iters must be >= 1 (got {self.max_iters})")
        if int(self.trace_every) < 1:
            errors.append(f"trace_every must be >= 1 (got {self.trace_every})")
        return errors

    @property
    def name(self) -> str:
        return "WF"


def default_step(ensemble: MeasurementEnsemble, x0) -> float:
    """Fixed step ``mu / ||x0||^2`` with ``mu = 0.1`` on the mean-normalised
    Wirtinger gradient ``(1/M) sum_m r_m a_m a_m^H x``.

    The real gradient used here is ``4 M`` times that, so the step taken on it
    is ``0.025 / (M ||x0||^2)``.
    """
    n2 = float(np.vdot(x0, x0).real)
    return 0.1 / (4.0 * ensemble.M * max(n2, 1e-300))


def line_search_coeffs(ensemble: MeasurementEnsemble, state: SolverState, direction):
    """Quartic coefficients of ``a -> f(xr + a*direction)``; O(MN)."""
    w = ensemble.A @ unembed(direction)
    z = state.z
    c2 = w.real**2 + w.imag**2
    c1 = 2.0 * (z.real * w.real + z.imag * w.imag)
    c0 = z.real**2 + z.imag**2
    state.touches += ensemble.M * ensemble.N
    return quartic_from_quadratics(c2, c1, c0, ensemble.intensities), w


def wf_step(ensemble: MeasurementEnsemble, state: SolverState, step="exact") -> SolverState:
    """One gradient step, updating ``state`` in place.

    ``step="exact"`` minimises along ``-grad``; a float takes
    ``xr - step * grad``. Either way costs 2MN sampling-matrix reads.
    """
    g = _gradient_from_products(ensemble, state.z)
    state.touches += ensemble.M * ensemble.N
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient")
    if not np.any(g):
        state.touches += ensemble.M * ensemble.N
        return state
    d = -g
    if isinstance(step, str):
        coeffs, w = line_search_coeffs(ensemble, state, d)
        alpha, val = minimize_quartic(coeffs)
        if not val <= coeffs.d0:
            return state
        state.x += alpha * d
        state.z += alpha * w
    else:
        state.x += float(step) * d
        state.z[:] = ensemble.A @ unembed(state.x)
        state.touches += ensemble.M * ensemble.N
    # a diverging fixed-step run may overflow; wf_run aborts on non-finite f
    with np.errstate(over="ignore", invalid="ignore"):
        r = state.z.real**2 + state.z.imag**2 - ensemble.intensities
        state.objective = float(r @ r)
    state.updates += 1
    return state


def wf_run(ensemble: MeasurementEnsemble, x0, config: WFConfig = None, x_ref=None,
           isi_fn: Optional[Callable] = None):
    """Iterate :func:`wf_step` until the decrease falls below ``tol``.

    Returns ``(x_hat, trace)`` with one trace record per iteration. A fixed-step
    run whose objective rises ``DIVERGENCE_PATIENCE`` times in a row raises
    :class:`DivergenceError`.
    """
    config = config or WFConfig()
    state = SolverState.from_point(ensemble, embed(x0))
    tol = config.tol if config.tol is not None else default_tol(state.objective)
    step = config.step if config.step is not None else default_step(ensemble, x0)
    trace = RunTrace()

    def record(it):
        x = state.signal
        trace.append(
            it, state.objective,
            relative_recovery_error(x, x_ref) if x_ref is not None else float("nan"),
            isi_fn(x) if isi_fn is not None else float("nan"),
            state.updates,
        )

    record(0)
    rises = 0
    for it in range(1, config.max_iters + 1):
        f_prev = state.objective
        wf_step(ensemble, state, step)
        decrease = f_prev - state.objective
        rises = rises + 1 if decrease < 0 else 0
        done = 0 <= decrease < tol
        if done or rises or it == config.max_iters or it % config.trace_every == 0:
            record(it)
        if rises >= DIVERGENCE_PATIENCE or not np.isfinite(state.objective):
            trace.touches = state.touches
            raise DivergenceError(f"objective increased {rises} iterations in a row", trace)
        if done:
            trace.converged = True
            break
    trace.touches = state.touches
    return state.signal, trace
