"""Coordinate-descent solvers for phase retrieval.

Cyclic, randomized and greedy coordinate descent on the quartic
least-squares intensity objective, l1-regularised variants for sparse
signals, a Wirtinger-flow baseline, constant-modulus blind equalisation and
Monte-Carlo benchmark tooling.
"""
from .cd_solvers import SolverConfig, cd_step, run, select_index
from .core import (
    MeasurementEnsemble,
    RunTrace,
    SolverState,
    dist_to_orbit,
    embed,
    gradient,
    objective,
    refresh_cache,
    relative_recovery_error,
    unembed,
)
from .measurement import GenConfig, make_instance
from .sparse_cd import L1Config, l1_run
from .spectral import SpectralConfig, spectral_init
from .wirtinger import WFConfig, wf_run

__version__ = "0.1.0"
