"""l1-regularised coordinate descent for sparse phase retrieval.

Each coordinate update minimises ``f + tau*||xr||_1`` exactly along one
coordinate with the fourth-order soft-thresholding operator.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cd_solvers import SolverConfig, advance, default_tol, run
from .core import (
    MeasurementEnsemble,
    RunTrace,
    SolverState,
    embed,
    objective,
    relative_recovery_error,
)
from .measurement import rng_stream
from .scalar_min import coordinate_coeffs

__all__ = [
    "L1_VARIANTS",
    "TAU_PER_MEASUREMENT",
    "L1Config",
    "l1_objective",
    "shift_coeffs",
    "l1_cd_step",
    "l1_run",
    "debias",
    "subgradient_violation",
]

L1_VARIANTS = ("l1-ccd", "l1-rcd")
#: default regularisation is tau = 2.35 * M
TAU_PER_MEASUREMENT = 2.35


@dataclass
class L1Config:
    """Settings for an l1-CD run; ``tau=None`` means ``2.35 * M``."""

    variant: str = "l1-ccd"
    tau: Optional[float] = None
    tol: Optional[float] = None
    max_cycles: int = 1000
    seed: int = 0
    debias: bool = False
    trace_every: int = 1

    def __post_init__(self):
        self.variant = str(self.variant).lower()
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    def validate(self) -> list:
        errors = []
        if self.variant in ("l1-gcd", "gcd"):
            errors.append("greedy selection needs the gradient, which the l1 objective lacks; use l1-ccd or l1-rcd")
        elif self.variant not in L1_VARIANTS:
            errors.append(f"variant must be one of {L1_VARIANTS} (got {self.variant!r})")
        if self.tau is not None and not self.tau > 0:
            errors.append(f"tau must be > 0 (got {self.tau})")
        if self.tol is not None and not self.tol > 0:
            errors.append(f"tol must be > 0 (got {self.tol})")
        if int(self.max_cycles) < 1:
            errors.append(f"max_cycles must be >= 1 (got {self.max_cycles})")
        if int(self.trace_every) < 1:
            errors.append(f"trace_every must be >= 1 (got {self.trace_every})")
        return errors

    @property
    def name(self) -> str:
        return self.variant.upper()

    def tau_for(self, ensemble: MeasurementEnsemble) -> float:
        return float(self.tau) if self.tau is not None else TAU_PER_MEASUREMENT * ensemble.M


def l1_objective(ensemble: MeasurementEnsemble, xr, tau: float) -> float:
    """``f(xr) + tau * sum_i |xr_i|``."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    return objective(ensemble, xr) + tau * float(np.sum(np.abs(xr)))


def shift_coeffs(c, xi: float):
    """Re-centre the coordinate quartic at ``beta = xi + alpha``.

    Returns ``(u4, u3, u2, u1)``; the constant term is dropped.
    """
    d4, d3, d2, d1, _ = c
    return (
        d4,
        d3 - 4.0 * xi * d4,
        d2 - 3.0 * xi * d3 + 6.0 * xi**2 * d4,
        d1 - 2.0 * xi * d2 + 3.0 * xi**2 * d3 - 4.0 * xi**3 * d4,
    )


def l1_cd_step(ensemble: MeasurementEnsemble, state: SolverState, i: int, tau: float) -> SolverState:
    """Set ``xr[i]`` to the FOST minimiser of the penalised objective (in place)."""
    if not 0 <= i < 2 * ensemble.N:
        raise IndexError(f"coordinate {i} out of range [0, {2 * ensemble.N})")
    if tau < 0:
        raise ValueError("tau must be non-negative")
    advance(ensemble, state, [i], tau=float(tau))
    return state


def l1_run(ensemble: MeasurementEnsemble, x0, config: L1Config = None, x_ref=None):
    """l1-CCD / l1-RCD until the per-cycle decrease of the penalised objective
    drops below ``tol``. The traced objective is the penalised one.
    """
    config = config or L1Config()
    tau = config.tau_for(ensemble)
    state = SolverState.from_point(ensemble, embed(x0))
    g = state.objective + tau * float(np.sum(np.abs(state.x)))
    tol = config.tol if config.tol is not None else default_tol(g)
    rng = rng_stream(config.seed, "rcd-index")
    n2 = 2 * ensemble.N
    trace = RunTrace()

    def record(cycle, g):
        err = relative_recovery_error(state.signal, x_ref) if x_ref is not None else float("nan")
        trace.append(cycle, g, err, float("nan"), state.updates)

    record(0, g)
    for cycle in range(1, config.max_cycles + 1):
        order = rng.integers(0, n2, size=n2) if config.variant == "l1-rcd" else np.arange(n2)
        advance(ensemble, state, order, tau=tau)
        g_new = state.objective + tau * float(np.sum(np.abs(state.x)))
        done = g - g_new < tol
        g = g_new
        if done or cycle == config.max_cycles or cycle % config.trace_every == 0:
            record(cycle, g)
        if done:
            trace.converged = True
            break
    trace.touches = state.touches
    x = state.signal
    if config.debias:
        x = debias(ensemble, x)
        if x_ref is not None:
            trace.rel_error[-1] = relative_recovery_error(x, x_ref)
    return x, trace


def debias(ensemble: MeasurementEnsemble, x, support_tol: float = 1e-6, max_cycles: int = 1000):
    """Plain cyclic CD restricted to the support of ``x``.

    The support is taken over complex entries (``|x_j| > support_tol``); both
    the real and imaginary coordinate of every supported entry are freed,
    since the penalty may zero one part of a nonzero entry.
    """
    state = SolverState.from_point(ensemble, embed(x))
    entries = np.flatnonzero(np.abs(np.asarray(x)) > support_tol)
    if entries.size == 0:
        return state.signal
    support = np.concatenate([entries, entries + ensemble.N])
    tol = default_tol(state.objective)
    for _ in range(max_cycles):
        f_prev = state.objective
        advance(ensemble, state, support)
        if f_prev - state.objective < tol:
            break
    return state.signal


def subgradient_violation(ensemble: MeasurementEnsemble, xr, tau: float) -> np.ndarray:
    """Per-coordinate distance of 0 from the subdifferential of the
    penalised objective, relative to ``tau``.

    Along coordinate i the smooth part has derivative ``d1``; optimality
    means ``d1 + tau*sign(xr_i) = 0`` for nonzero entries and ``|d1| <= tau``
    at zero.
    """
    state = SolverState.from_point(ensemble, xr)
    out = np.empty(2 * ensemble.N)
    for i in range(2 * ensemble.N):
        d1 = coordinate_coeffs(ensemble, state, i).d1
        xi = state.x[i]
        if xi != 0.0:
            out[i] = abs(d1 + tau * np.sign(xi))
        else:
            out[i] = max(abs(d1) - tau, 0.0)
    return out / tau


def plain_config_for(config: L1Config) -> SolverConfig:
    """Unregularised counterpart of an l1 config (same index rule and seed)."""
    return SolverConfig(variant=config.variant.split("-")[1], tol=config.tol,
                        max_cycles=config.max_cycles, seed=config.seed)


def plain_run(ensemble, x0, config: L1Config, x_ref=None):
    return run(ensemble, x0, plain_config_for(config), x_ref=x_ref)
