"""Cyclic, randomized and greedy coordinate descent on the quartic objective.

One iteration minimises the objective exactly along a single real coordinate
of the embedded iterate and patches the cached products ``z = A x`` in O(M).
A cycle is 2N iterations.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numba import njit

from .core import (
    REFRESH_EVERY,
    MeasurementEnsemble,
    RunTrace,
    SolverState,
    embed,
    relative_recovery_error,
)
from .measurement import rng_stream
from .scalar_min import (
    _coord_coeffs,
    _fost,
    _polyval4,
    _quartic_argmin,
    _quartic_argmin_interval,
)

__all__ = [
    "VARIANTS",
    "SolverConfig",
    "select_index",
    "cd_step",
    "run",
    "default_tol",
]

VARIANTS = ("ccd", "rcd", "gcd")


@njit(cache=True)
def _recompute_products(cols, x, z):
    n, m = cols.shape
    for k in range(m):
        z[k] = 0.0
    for j in range(n):
        xj = complex(x[j], x[n + j])
        if xj != 0.0:
            for k in range(m):
                z[k] += cols[j, k] * xj


@njit(cache=True)
def _objective_from_products(z, b):
    f = 0.0
    for m in range(z.shape[0]):
        r = z[m].real * z[m].real + z[m].imag * z[m].imag - b[m]
        f += r * r
    return f


@njit(cache=True)
def _greedy_index(cols, b, z):
    """Coordinate with the largest |partial derivative| (lowest index on ties)."""
    n, m = cols.shape
    best = -1.0
    best_i = 0
    for part in range(2):
        for j in range(n):
            wr = 0.0
            wi = 0.0
            for k in range(m):
                zk = z[k]
                r = zk.real * zk.real + zk.imag * zk.imag - b[k]
                c = cols[j, k]
                # r * z * conj(c)
                wr += r * (zk.real * c.real + zk.imag * c.imag)
                wi += r * (zk.imag * c.real - zk.real * c.imag)
            g = abs(4.0 * (wr if part == 0 else wi))
            if g > best:
                best = g
                best_i = part * n + j
    return best_i


@njit(cache=True)
def _sweep(cols, b, x, z, order, n_steps, greedy, eta, l1, tau,
           since_refresh, refresh_every, alphas, fvals, record):
    """Run ``n_steps`` coordinate updates in place.

    Returns (touches, refresh_touches, since_refresh). ``touches`` counts
    sampling-matrix entries read by the updates and index selection;
    ``refresh_touches`` those read by periodic full recomputation.
    """
    n, m = cols.shape
    touches = 0
    refresh_touches = 0
    for k in range(n_steps):
        if greedy:
            i = _greedy_index(cols, b, z)
            touches += n * m
        else:
            i = order[k]
        j = i - n if i >= n else i
        imag = i >= n
        col = cols[j]
        d4, d3, d2, d1, d0 = _coord_coeffs(col, b, z, imag)
        touches += m
        if l1:
            xi = x[i]
            u4 = d4
            u3 = d3 - 4.0 * xi * d4
            u2 = d2 - 3.0 * xi * d3 + 6.0 * xi * xi * d4
            u1 = d1 - 2.0 * xi * d2 + 3.0 * xi * xi * d3 - 4.0 * xi * xi * xi * d4
            beta = _fost(u4, u3, u2, u1, tau)
            new_val = _polyval4(u4, u3, u2, u1, 0.0, beta) + tau * abs(beta)
            old_val = _polyval4(u4, u3, u2, u1, 0.0, xi) + tau * abs(xi)
            if new_val <= old_val:
                alpha = beta - xi
                target = beta
            else:
                alpha = 0.0
                target = xi
        else:
            if eta > 0.0:
                bound = 2.0 * eta * abs(d1)  # d1 is the partial derivative at alpha = 0
                alpha, val = _quartic_argmin_interval(d4, d3, d2, d1, d0, -bound, bound)
            else:
                alpha, val = _quartic_argmin(d4, d3, d2, d1, d0)
            if not val <= d0:
                alpha = 0.0
            target = x[i] + alpha
        if alpha != 0.0:
            x[i] = target
            if imag:
                for q in range(m):
                    c = col[q]
                    z[q] += complex(-alpha * c.imag, alpha * c.real)
            else:
                for q in range(m):
                    z[q] += alpha * col[q]
        alphas[k] = alpha
        since_refresh += 1
        if since_refresh >= refresh_every:
            _recompute_products(cols, x, z)
            refresh_touches += n * m
            since_refresh = 0
        if record:
            f = _objective_from_products(z, b)
            if l1:
                s = 0.0
                for q in range(2 * n):
                    s += abs(x[q])
                f += tau * s
            fvals[k] = f
    return touches, refresh_touches, since_refresh


def advance(ensemble: MeasurementEnsemble, state: SolverState, order, greedy=False,
            eta=None, tau=None, record=False):
    """Apply the coordinate updates listed in ``order`` (or ``len(order)``
    greedy ones) to ``state`` in place.

    ``tau`` switches to the l1-penalised update. Returns the steps taken and,
    with ``record``, the objective after every step (penalised when ``tau`` is
    set); otherwise ``None``.
    """
    order = np.ascontiguousarray(order, dtype=np.int64)
    n_steps = order.shape[0]
    alphas = np.empty(n_steps)
    fvals = np.empty(n_steps if record else 0)
    touches, rtouches, since = _sweep(
        ensemble.cols, ensemble.intensities, state.x, state.z, order, n_steps,
        bool(greedy), float(eta or 0.0), tau is not None, float(tau or 0.0),
        state.since_refresh, REFRESH_EVERY, alphas, fvals, bool(record),
    )
    state.touches += touches
    state.refresh_touches += rtouches
    state.since_refresh = since
    state.updates += n_steps
    state.objective = float(_objective_from_products(state.z, ensemble.intensities))
    return alphas, (fvals if record else None)


def default_tol(f0: float) -> float:
    return 1e-10 * max(1.0, f0)


@dataclass
class SolverConfig:
    """Settings for one coordinate-descent run.

    ``tol=None`` means ``1e-10 * max(1, f(x0))``. ``step_bound_eta`` limits
    every step to ``|alpha| <= 2 eta |partial derivative|``.
    """

    variant: str = "ccd"
    tol: Optional[float] = None
    max_cycles: int = 1000
    seed: int = 0
    step_bound_eta: Optional[float] = None
    trace_every: int = 1

    def __post_init__(self):
        self.variant = str(self.variant).lower()
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    def validate(self) -> list:
        errors = []
        if self.variant not in VARIANTS:
            errors.append(f"variant must be one of {VARIANTS} (got {self.variant!r})")
        if self.tol is not None and not self.tol > 0:
            errors.append(f"tol must be > 0 (got {self.tol})")
        if int(self.max_cycles) < 1:
            errors.append(f"max_cycles must be >= 1 (got {self.max_cycles})")
        if self.step_bound_eta is not None and not self.step_bound_eta > 0:
            errors.append(f"step_bound_eta must be > 0 (got {self.step_bound_eta})")
        if int(self.trace_every) < 1:
            errors.append(f"trace_every must be >= 1 (got {self.trace_every})")
        return errors

    @property
    def name(self) -> str:
        return self.variant.upper()


def select_index(rule: str, k: int, state: SolverState, ensemble: MeasurementEnsemble,
                 rng: Optional[np.random.Generator] = None) -> int:
    """Coordinate for iteration ``k`` under the cyclic, random or greedy rule."""
    n2 = 2 * ensemble.N
    if rule == "cyclic":
        return k % n2
    if rule == "random":
        if rng is None:
            raise ValueError("random rule needs a generator")
        return int(rng.integers(0, n2))
    if rule == "greedy":
        state.touches += ensemble.M * ensemble.N
        return int(_greedy_index(ensemble.cols, ensemble.intensities, state.z))
    raise ValueError(f"unknown index rule {rule!r}")


def cd_step(ensemble: MeasurementEnsemble, state: SolverState, i: int, step_bound_eta=None):
    """Exact minimisation along coordinate ``i``; returns ``(state, alpha)``.

    The state is updated in place.
    """
    if not 0 <= i < 2 * ensemble.N:
        raise IndexError(f"coordinate {i} out of range [0, {2 * ensemble.N})")
    alphas, _ = advance(ensemble, state, [i], eta=step_bound_eta)
    return state, float(alphas[0])


def _cycle_order(variant, n2, rng):
    if variant == "rcd":
        return rng.integers(0, n2, size=n2)
    return np.arange(n2)


def run(ensemble: MeasurementEnsemble, x0, config: SolverConfig = None, x_ref=None,
        isi_fn: Optional[Callable] = None):
    """Coordinate descent from ``x0`` until the per-cycle decrease drops below
    ``tol`` or ``max_cycles`` is reached.

    Returns the final complex iterate and a per-cycle :class:`RunTrace`
    (cycle 0 is the starting point).
    """
    config = config or SolverConfig()
    state = SolverState.from_point(ensemble, embed(x0))
    tol = config.tol if config.tol is not None else default_tol(state.objective)
    rng = rng_stream(config.seed, "rcd-index")
    n2 = 2 * ensemble.N
    trace = RunTrace()

    def record(cycle):
        x = state.signal
        trace.append(
            cycle, state.objective,
            relative_recovery_error(x, x_ref) if x_ref is not None else float("nan"),
            isi_fn(x) if isi_fn is not None else float("nan"),
            state.updates,
        )

    record(0)
    for cycle in range(1, config.max_cycles + 1):
        f_prev = state.objective
        advance(ensemble, state, _cycle_order(config.variant, n2, rng),
                greedy=config.variant == "gcd", eta=config.step_bound_eta)
        done = f_prev - state.objective < tol
        if done or cycle == config.max_cycles or cycle % config.trace_every == 0:
            record(cycle)
        if done:
            trace.converged = True
            break
    trace.touches = state.touches
    return state.signal, trace
