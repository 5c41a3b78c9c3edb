"""Spectral initialisation by matrix-free power iteration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MeasurementEnsemble
from .measurement import rng_stream

__all__ = ["SpectralConfig", "power_iteration", "spectral_matvec", "spectral_init"]


@dataclass
class SpectralConfig:
    power_iters: int = 200
    tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.power_iters < 1:
            raise ValueError("power_iters must be >= 1")


def spectral_matvec(ensemble: MeasurementEnsemble):
    """Return ``v -> Y v`` with ``Y = (1/M) sum_m b_m a_m a_m^H``, never forming Y."""
    a, A, b, m = ensemble.sampling_vectors, ensemble.A, ensemble.intensities, ensemble.M

    def matvec(v):
        return a.T @ (b * (A @ v)) / m

    return matvec


def power_iteration(matvec, v0, iters=200, tol=1e-8, shift=0.0):
    """Leading eigenvector of the Hermitian operator ``matvec + shift*I``.

    Stops once the angle between successive iterates drops below ``tol``.
    Returns the unit eigenvector and the Rayleigh quotients of the shifted
    operator, one per iteration.
    """
    v = np.asarray(v0, dtype=np.complex128)
    v = v / np.linalg.norm(v)
    rayleigh = []
    for _ in range(iters):
        w = matvec(v) + shift * v
        rayleigh.append(float(np.vdot(v, w).real))
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            break
        w /= nrm
        overlap = min(abs(np.vdot(v, w)), 1.0)
        v = w
        # sin of the angle between successive iterates
        if np.sqrt(max(1.0 - overlap * overlap, 0.0)) < tol:
            break
    return v, rayleigh


def spectral_init(ensemble: MeasurementEnsemble, config: SpectralConfig | None = None, return_info=False):
    """Principal eigenvector of ``(1/M) sum b_m a_m a_m^H``, scaled to
    ``||x0||^2 = N ||b||_1 / sum_m ||a_m||^2``.

    Negative intensities are kept; the operator is shifted by an upper bound
    on its most negative eigenvalue so power iteration targets the largest
    algebraic eigenvalue.
    """
    config = config or SpectralConfig()
    b = ensemble.intensities
    if not np.any(b):
        raise ValueError("all intensities are zero; spectral estimate is degenerate")
    row_norm2 = np.sum(np.abs(ensemble.sampling_vectors) ** 2, axis=1)
    shift = float(np.sum(np.where(b < 0, -b, 0.0) * row_norm2)) / ensemble.M
    rng = rng_stream(config.seed, "spectral-start")
    v0 = rng.standard_normal(ensemble.N) + 1j * rng.standard_normal(ensemble.N)
    v, rayleigh = power_iteration(spectral_matvec(ensemble), v0, config.power_iters, config.tol, shift)
    scale = np.sqrt(ensemble.N * np.sum(np.abs(b)) / np.sum(row_norm2))
    x0 = scale * v
    if return_info:
        return x0, {"rayleigh": rayleigh, "shift": shift, "iterations": len(rayleigh)}
    return x0
