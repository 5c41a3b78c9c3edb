"""Synthetic phase-retrieval instances.

All generators take a ``seed`` (int, SeedSequence or Generator) and are pure
functions of their arguments. Complex Gaussian draws use the CN(0, 1)
convention: real and imaginary parts are independent N(0, 1/2).
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import MeasurementEnsemble

__all__ = [
    "GenConfig",
    "rng_stream",
    "derive_seed",
    "gen_gaussian_vectors",
    "gen_signal",
    "gen_sparse_signal",
    "measure",
    "magnitudes_to_intensities",
    "make_instance",
]


def _purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def rng_stream(seed: int, purpose: str = "") -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, purpose)``.

    Streams for different purposes never overlap, so adding draws for one
    purpose leaves every other stream untouched.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), _purpose_key(purpose)])))


def derive_seed(base_seed: int, *keys: int) -> int:
    """64-bit seed derived from ``base_seed`` and integer keys (e.g. trial index)."""
    words = np.random.SeedSequence([int(base_seed), *map(int, keys)]).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


@dataclass
class GenConfig:
    N: int = 64
    M: int = 384
    K: Optional[int] = None
    snr_db: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    def validate(self) -> list:
        errors = []
        if int(self.N) < 1:
            errors.append(f"N must be >= 1 (got {self.N})")
        if int(self.M) < 1:
            errors.append(f"M must be >= 1 (got {self.M})")
        if self.K is not None and not 1 <= int(self.K) <= int(self.N):
            errors.append(f"K must satisfy 1 <= K <= N (got K={self.K}, N={self.N})")
        return errors


def gen_gaussian_vectors(N: int, M: int, seed) -> np.ndarray:
    """M sampling vectors (rows) with i.i.d. CN(0, 1) entries."""
    if N < 1 or M < 1:
        raise ValueError("N and M must be positive")
    return _complex_normal(_rng(seed), (M, N))


def gen_signal(N: int, seed) -> np.ndarray:
    """Dense CN(0, 1) signal of length N."""
    if N < 1:
        raise ValueError("N must be positive")
    return _complex_normal(_rng(seed), N)


def gen_sparse_signal(N: int, K: int, seed) -> np.ndarray:
    """K-sparse signal with uniformly random support.

    Real and imaginary parts of the nonzeros are uniform on
    ``[-2/sqrt2, -1/sqrt2] U [1/sqrt2, 2/sqrt2]``.
    """
    if not 1 <= K <= N:
        raise ValueError(f"K must satisfy 1 <= K <= N (got K={K}, N={N})")
    rng = _rng(seed)
    support = rng.choice(N, size=K, replace=False)
    mag = rng.uniform(1.0, 2.0, size=(2, K)) / np.sqrt(2.0)
    sign = rng.choice(np.array([-1.0, 1.0]), size=(2, K))
    parts = sign * mag
    x = np.zeros(N, dtype=np.complex128)
    x[support] = parts[0] + 1j * parts[1]
    return x


def measure(vectors, x, snr_db: Optional[float] = None, seed=None) -> np.ndarray:
    """Intensities ``b_m = |a_m^H x|^2 + nu_m``.

    The noise is real Gaussian with variance chosen so that
    ``||b_clean||^2 / (M sigma^2)`` equals the target SNR, using the realised
    clean energy. Noiseless when ``snr_db`` is None.
    """
    a = np.asarray(vectors, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    if a.ndim != 2 or x.shape != (a.shape[1],):
        raise ValueError(f"dimension mismatch: vectors {a.shape}, signal {x.shape}")
    z = np.conj(a) @ x
    b = z.real**2 + z.imag**2
    if snr_db is None:
        return b
    m = b.shape[0]
    sigma2 = float(b @ b) / (m * 10.0 ** (snr_db / 10.0))
    return b + np.sqrt(sigma2) * _rng(seed).standard_normal(m)


def magnitudes_to_intensities(r) -> np.ndarray:
    """Square magnitude-only observations. Not idempotent: [4] -> [16]."""
    r = np.asarray(r, dtype=np.float64)
    return r * r


def make_instance(cfg: GenConfig, seed: Optional[int] = None):
    """Build ``(ensemble, x_true)`` for a generation config.

    Each ingredient (vectors, signal, noise) draws from its own stream of
    ``seed`` (defaults to ``cfg.seed``).
    """
    seed = cfg.seed if seed is None else seed
    a = gen_gaussian_vectors(cfg.N, cfg.M, rng_stream(seed, "vectors"))
    if cfg.K is None:
        x = gen_signal(cfg.N, rng_stream(seed, "signal"))
    else:
        x = gen_sparse_signal(cfg.N, cfg.K, rng_stream(seed, "signal"))
    b = measure(a, x, cfg.snr_db, rng_stream(seed, "noise"))
    return MeasurementEnsemble(a, b), x
