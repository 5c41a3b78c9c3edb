"""Blind channel equalisation with the constant-modulus criterion.

The CM cost ``sum_n (|w^H r_n|^2 - kappa)^2`` is the phase-retrieval
objective with sampling vectors ``r_n`` (received windows), intensities
``kappa`` and unknown ``w``, so the solvers run on it unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .cd_solvers import SolverConfig, run
from .core import MeasurementEnsemble
from .measurement import rng_stream
from .spectral import spectral_init
from .wirtinger import WFConfig, wf_run

__all__ = [
    "DEFAULT_CHANNEL",
    "QPSK",
    "ChannelModel",
    "gen_qpsk",
    "channel_output",
    "dispersion_constant",
    "build_cma_ensemble",
    "isi",
    "isi_db",
    "center_tap",
    "EqualizerResult",
    "equalize_run",
]

DEFAULT_CHANNEL = (0.4, 1.0, -0.7, 0.6, 0.3, -0.4, 0.1)
QPSK = np.array([1.0, -1.0, 1j, -1j])


@dataclass(frozen=True)
class ChannelModel:
    taps: tuple = DEFAULT_CHANNEL

    def __post_init__(self):
        h = np.asarray(self.taps, dtype=np.complex128)
        if h.ndim != 1 or not np.any(h):
            raise ValueError("channel needs at least one nonzero tap")

    @property
    def h(self) -> np.ndarray:
        return np.asarray(self.taps, dtype=np.complex128)


def gen_qpsk(n_symbols: int, seed) -> np.ndarray:
    """I.i.d. uniform symbols from {1, -1, j, -j}."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return QPSK[rng.integers(0, 4, size=n_symbols)]


def channel_output(h, s, snr_db: Optional[float] = None, seed=None) -> np.ndarray:
    """Full linear convolution ``s * h`` plus circular complex white noise.

    The noise variance is the realised mean power of ``s * h`` divided by the
    target SNR.
    """
    h = np.asarray(h, dtype=np.complex128)
    if not np.any(h):
        raise ValueError("channel needs at least one nonzero tap")
    y = np.convolve(np.asarray(s, dtype=np.complex128), h)
    if snr_db is None:
        return y
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sigma2 = float(np.mean(np.abs(y) ** 2)) / 10.0 ** (snr_db / 10.0)
    noise = (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)) * np.sqrt(sigma2 / 2.0)
    return y + noise


def dispersion_constant(symbols) -> float:
    """``E|s|^4 / E|s|^2`` over equiprobable constellation points or samples."""
    p = np.abs(np.asarray(symbols)) ** 2
    power = float(np.mean(p))
    if power == 0.0:
        raise ValueError("symbol model has zero power")
    return float(np.mean(p * p)) / power


def build_cma_ensemble(received, P: int, kappa: float) -> MeasurementEnsemble:
    """Rows ``r_n = [r(n), ..., r(n-P+1)]`` for every full window, intensities ``kappa``."""
    r = np.asarray(received, dtype=np.complex128)
    if P < 1 or P > r.shape[0]:
        raise ValueError(f"equalizer length {P} needs at least {P} samples (got {r.shape[0]})")
    windows = np.lib.stride_tricks.sliding_window_view(r, P)[:, ::-1]
    return MeasurementEnsemble(windows, np.full(windows.shape[0], float(kappa)))


def isi(h, w) -> float:
    """Residual inter-symbol interference of the combined response.

    The equaliser output is ``w^H r_n``, so the combined response is
    ``h * conj(w)``; for real channels this equals ``h * w`` in modulus.
    """
    v = np.abs(np.convolve(np.asarray(h, dtype=np.complex128), np.conj(np.asarray(w, dtype=np.complex128)))) ** 2
    peak = float(np.max(v, initial=0.0))
    if peak == 0.0:
        raise ValueError("combined response is identically zero")
    return (float(np.sum(v)) - peak) / peak


def isi_db(value: float) -> float:
    return 10.0 * np.log10(value)


def center_tap(P: int) -> np.ndarray:
    """``e_k`` with ``k = ceil(P/2)`` (1-based)."""
    w = np.zeros(P, dtype=np.complex128)
    w[(P + 1) // 2 - 1] = 1.0
    return w


@dataclass
class EqualizerResult:
    w: np.ndarray
    isi_trace: list
    trace: object
    ensemble: MeasurementEnsemble


def equalize_run(channel=DEFAULT_CHANNEL, n_symbols: int = 2000, P: int = 16, snr_db: Optional[float] = 25.0,
                 solver_config: Union[SolverConfig, WFConfig, None] = None, seed: int = 0,
                 init: str = "center") -> EqualizerResult:
    """Symbols -> channel -> CM ensemble -> solver, recording ISI per cycle.

    Only the first ``n_symbols`` received samples are used, giving
    ``n_symbols - P + 1`` windows. ``init`` is ``"center"`` (centre tap) or
    ``"spectral"``.
    """
    h = channel.h if isinstance(channel, ChannelModel) else np.asarray(channel, dtype=np.complex128)
    s = gen_qpsk(n_symbols, rng_stream(seed, "symbols"))
    r = channel_output(h, s, snr_db, rng_stream(seed, "channel-noise"))[:n_symbols]
    ens = build_cma_ensemble(r, P, dispersion_constant(QPSK))
    if init == "center":
        w0 = center_tap(P)
    elif init == "spectral":
        w0 = spectral_init(ens)
    else:
        raise ValueError(f"unknown init {init!r}")
    config = solver_config or SolverConfig()

    def isi_fn(w):
        return isi(h, w)

    if isinstance(config, WFConfig):
        w, trace = wf_run(ens, w0, config, isi_fn=isi_fn)
    else:
        w, trace = run(ens, w0, config, isi_fn=isi_fn)
    return EqualizerResult(w, list(trace.isi), trace, ens)
