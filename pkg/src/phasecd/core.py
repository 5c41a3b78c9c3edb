"""Problem instance, real embedding, solver state and shared metrics.

Conventions used throughout the package:

* A complex signal ``x`` of length N is handled by the solvers through its
  real embedding ``xr = [Re(x), Im(x)]`` of length 2N.
* ``MeasurementEnsemble.sampling_vectors`` holds the rows ``a_m`` (shape M x N).
  The cached products are ``z_m = a_m^H x``, i.e. ``z = conj(a) @ x``.
* ``gradient`` returns the Euclidean gradient of ``f`` over R^{2N}, which is
  twice the stacked real/imaginary parts of the Wirtinger gradient.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "MeasurementEnsemble",
    "SolverState",
    "RunTrace",
    "SUCCESS_THRESHOLD",
    "embed",
    "unembed",
    "objective",
    "gradient",
    "refresh_cache",
    "dist_to_orbit",
    "relative_recovery_error",
    "is_success",
]

#: relative recovery error below which a noiseless run counts as exact recovery
SUCCESS_THRESHOLD = 1e-5


class MeasurementEnsemble:
    """Sampling vectors ``a_m`` and intensities ``b_m`` of one problem instance.

    The arrays are copied and frozen on construction, so an ensemble can be
    shared between trials running at the same time.

    Parameters
    ----------
    sampling_vectors : array_like, shape (M, N)
        Row ``m`` is the sampling vector ``a_m``.
    intensities : array_like, shape (M,)
        Observed ``b_m``. Negative entries (noise) are kept as given.
    """

    def __init__(self, sampling_vectors, intensities):
        a = np.array(sampling_vectors, dtype=np.complex128, ndmin=2)
        b = np.array(intensities, dtype=np.float64).reshape(-1)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"sampling vectors must be a non-empty 2-D array, got shape {a.shape}")
        if b.shape[0] != a.shape[0]:
            raise ValueError(f"got {a.shape[0]} sampling vectors but {b.shape[0]} intensities")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("ensemble contains non-finite values")
        self.sampling_vectors = a
        self.intensities = b
        # rows a_m^H; A @ x gives the products z
        self.A = np.conj(a)
        # column j of A stored contiguously: cols[j, m] = conj(a_m[j])
        self.cols = np.ascontiguousarray(self.A.T)
        for arr in (self.sampling_vectors, self.intensities, self.A, self.cols):
            arr.setflags(write=False)

    @property
    def M(self) -> int:
        return self.sampling_vectors.shape[0]

    @property
    def N(self) -> int:
        return self.sampling_vectors.shape[1]

    def products(self, x) -> np.ndarray:
        """Return ``z`` with ``z_m = a_m^H x`` for a complex ``x``."""
        x = np.asarray(x, dtype=np.complex128)
        if x.shape != (self.N,):
            raise ValueError(f"expected a signal of length {self.N}, got shape {x.shape}")
        return self.A @ x

    def __repr__(self):
        return f"MeasurementEnsemble(M={self.M}, N={self.N})"


def embed(x) -> np.ndarray:
    """Stack real and imaginary parts: ``[Re(x), Im(x)]``."""
    x = np.asarray(x, dtype=np.complex128).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot embed a vector with non-finite entries")
    return np.concatenate([x.real, x.imag])


def unembed(xr) -> np.ndarray:
    """Inverse of :func:`embed`."""
    xr = np.asarray(xr, dtype=np.float64).reshape(-1)
    if xr.shape[0] % 2:
        raise ValueError(f"real embedding must have even length, got {xr.shape[0]}")
    n = xr.shape[0] // 2
    return xr[:n] + 1j * xr[n:]


def _as_real(ensemble: MeasurementEnsemble, xr) -> np.ndarray:
    xr = np.asarray(xr, dtype=np.float64).reshape(-1)
    if xr.shape[0] != 2 * ensemble.N:
        raise ValueError(f"expected a real embedding of length {2 * ensemble.N}, got {xr.shape[0]}")
    return xr


def objective(ensemble: MeasurementEnsemble, xr) -> float:
    """Least-squares intensity misfit ``sum_m (|a_m^H x|^2 - b_m)^2``."""
    z = ensemble.A @ unembed(_as_real(ensemble, xr))
    r = z.real**2 + z.imag**2 - ensemble.intensities
    return float(r @ r)


def _gradient_from_products(ensemble: MeasurementEnsemble, z: np.ndarray) -> np.ndarray:
    r = z.real**2 + z.imag**2 - ensemble.intensities
    w = ensemble.sampling_vectors.T @ (r * z)
    return 4.0 * np.concatenate([w.real, w.imag])


def gradient(ensemble: MeasurementEnsemble, xr) -> np.ndarray:
    """Gradient of the objective with respect to the real embedding.

    Equals ``2 * [Re(g), Im(g)]`` with ``g = 2 sum_m (|a_m^H x|^2 - b_m) a_m a_m^H x``.
    Cost is O(MN).
    """
    z = ensemble.A @ unembed(_as_real(ensemble, xr))
    return _gradient_from_products(ensemble, z)


@dataclass
class SolverState:
    """Current iterate with its cached products and objective value.

    ``touches`` counts entries of the sampling matrix read by the solver;
    ``refresh_touches`` counts those spent on periodic full recomputation of
    the cache. ``updates`` counts coordinate updates since construction and
    ``since_refresh`` those since the cache was last recomputed in full.
    """

    x: np.ndarray
    z: np.ndarray
    objective: float
    updates: int = 0
    since_refresh: int = 0
    touches: int = 0
    refresh_touches: int = 0

    @classmethod
    def from_point(cls, ensemble: MeasurementEnsemble, xr) -> "SolverState":
        x = np.array(_as_real(ensemble, xr), dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise ValueError("initial point has non-finite entries")
        state = cls(x=x, z=np.empty(ensemble.M, dtype=np.complex128), objective=0.0)
        state.recompute(ensemble)
        state.refresh_touches = 0
        return state

    @property
    def signal(self) -> np.ndarray:
        return unembed(self.x)

    def recompute(self, ensemble: MeasurementEnsemble) -> None:
        """Recompute the cache from scratch (O(MN))."""
        self.z[:] = ensemble.A @ unembed(self.x)
        r = self.z.real**2 + self.z.imag**2 - ensemble.intensities
        self.objective = float(r @ r)
        self.since_refresh = 0
        self.refresh_touches += ensemble.M * ensemble.N

    def cache_error(self, ensemble: MeasurementEnsemble) -> float:
        """Max relative deviation of the cached products from a full recompute."""
        exact = ensemble.A @ unembed(self.x)
        scale = max(float(np.max(np.abs(exact), initial=0.0)), 1e-300)
        return float(np.max(np.abs(exact - self.z), initial=0.0)) / scale

    def check_cache(self, ensemble: MeasurementEnsemble, rtol: float = 1e-9) -> None:
        err = self.cache_error(ensemble)
        if err > rtol:
            raise AssertionError(f"stale product cache: relative error {err:.3e} > {rtol:.1e}")

    def copy(self) -> "SolverState":
        return SolverState(
            self.x.copy(), self.z.copy(), self.objective, self.updates,
            self.since_refresh, self.touches, self.refresh_touches,
        )


#: full cache recomputation period, in coordinate updates
REFRESH_EVERY = 10_000


def refresh_cache(ensemble: MeasurementEnsemble, state: SolverState, index: int, delta: float) -> SolverState:
    """Apply ``xr[index] += delta`` and update the cached products in O(M).

    ``index < N`` moves the real part of entry ``index``, otherwise the
    imaginary part of entry ``index - N``. The state is modified in place and
    returned.
    """
    n = ensemble.N
    if not 0 <= index < 2 * n:
        raise IndexError(f"coordinate {index} out of range [0, {2 * n})")
    if delta != 0.0:
        col = ensemble.cols[index % n]
        step = delta if index < n else 1j * delta
        state.x[index] += delta
        state.z += step * col
        r = state.z.real**2 + state.z.imag**2 - ensemble.intensities
        state.objective = float(r @ r)
    state.touches += ensemble.M
    state.updates += 1
    state.since_refresh += 1
    if state.since_refresh >= REFRESH_EVERY:
        state.recompute(ensemble)
    return state


def dist_to_orbit(z, x_ref) -> float:
    """Distance from ``z`` to the global-phase orbit ``{exp(1j*phi) x_ref}``."""
    z = np.asarray(z, dtype=np.complex128).reshape(-1)
    x_ref = np.asarray(x_ref, dtype=np.complex128).reshape(-1)
    if z.shape != x_ref.shape:
        raise ValueError(f"length mismatch: {z.shape[0]} vs {x_ref.shape[0]}")
    d2 = np.vdot(z, z).real + np.vdot(x_ref, x_ref).real - 2.0 * abs(np.vdot(x_ref, z))
    return float(np.sqrt(max(d2, 0.0)))


def optimal_phase(z, x_ref) -> float:
    """Phase ``phi`` minimising ``||z - exp(1j*phi) x_ref||``."""
    return float(-np.angle(np.vdot(np.asarray(z), np.asarray(x_ref))))


def relative_recovery_error(z, x_ref) -> float:
    """Squared orbit distance over ``||x_ref||^2``."""
    x_ref = np.asarray(x_ref, dtype=np.complex128).reshape(-1)
    ref2 = np.vdot(x_ref, x_ref).real
    if ref2 == 0.0:
        raise ValueError("reference signal is zero")
    # direct difference after phase alignment avoids cancellation near zero error
    z = np.asarray(z, dtype=np.complex128).reshape(-1)
    if z.shape != x_ref.shape:
        raise ValueError(f"length mismatch: {z.shape[0]} vs {x_ref.shape[0]}")
    diff = z - np.exp(1j * optimal_phase(z, x_ref)) * x_ref
    return float(np.vdot(diff, diff).real / ref2)


def is_success(rel_error: float) -> bool:
    return rel_error < SUCCESS_THRESHOLD


@dataclass
class RunTrace:
    """Per-cycle records of one solver run.

    Columns ``rel_error`` and ``isi`` hold ``nan`` when the quantity was not
    tracked (no reference signal / not an equalizer run).
    """

    cycle: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    rel_error: list = field(default_factory=list)
    isi: list = field(default_factory=list)
    updates: list = field(default_factory=list)
    converged: bool = False
    touches: int = 0

    def append(self, cycle, objective, rel_error=float("nan"), isi=float("nan"), updates=0):
        self.cycle.append(int(cycle))
        self.objective.append(float(objective))
        self.rel_error.append(float(rel_error))
        self.isi.append(float(isi))
        self.updates.append(int(updates))

    def __len__(self):
        return len(self.cycle)

    @property
    def cycles(self) -> int:
        """Index of the last recorded cycle."""
        return self.cycle[-1] if self.cycle else 0

    def first_cycle_below(self, level: float) -> Optional[int]:
        """First recorded cycle whose objective is ``<= level``, else None."""
        for c, f in zip(self.cycle, self.objective):
            if f <= level:
                return c
        return None

    def is_monotone(self, rtol: float = 1e-12, atol: float = 0.0) -> bool:
        f = np.asarray(self.objective)
        return bool(np.all(f[1:] <= f[:-1] * (1 + rtol) + atol))

    def to_csv(self, path) -> None:
        """Write ``cycle,objective,rel_error,isi`` with 17 significant digits."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cycle", "objective", "rel_error", "isi"])
            for c, f, e, s in zip(self.cycle, self.objective, self.rel_error, self.isi):
                w.writerow([c, _fmt(f), _fmt(e), _fmt(s)])

    @classmethod
    def from_csv(cls, path) -> "RunTrace":
        trace = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                trace.append(
                    int(row["cycle"]), float(row["objective"]),
                    float(row["rel_error"]) if row["rel_error"] else float("nan"),
                    float(row["isi"]) if row["isi"] else float("nan"),
                )
        return trace


def _fmt(v: float) -> str:
    if v != v:  # nan -> blank cell
        return ""
    return format(v, ".17g")
