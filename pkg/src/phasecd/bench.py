"""Monte-Carlo experiment orchestration and metric aggregation.

An experiment is described by an :class:`ExperimentSpec` (loadable from a
YAML file). :func:`run_experiment` runs every (solver, trial) pair, writes one
trace CSV per pair and a ``summary.json`` holding the per-run records and the
aggregated metrics.

Trial ``i`` draws everything from seeds derived from ``(base_seed, i)``, so
results do not depend on worker count or execution order.
"""
from __future__ import annotations

import copy
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import yaml

from .cd_solvers import VARIANTS, SolverConfig, run
from .core import SUCCESS_THRESHOLD
from .equalizer import DEFAULT_CHANNEL, equalize_run
from .measurement import GenConfig, derive_seed, make_instance
from .sparse_cd import L1_VARIANTS, L1Config, l1_run
from .spectral import SpectralConfig, spectral_init
from .wirtinger import DivergenceError, WFConfig, wf_run

__all__ = [
    "KINDS",
    "SOLVER_NAMES",
    "SpecError",
    "ExperimentSpec",
    "SummaryRecord",
    "default_spec",
    "parse_solver",
    "run_experiment",
    "run_trial",
    "aggregate",
    "load_spec",
]

KINDS = ("recover", "sparse", "equalize", "success-curve", "nmse-curve")
SOLVER_NAMES = VARIANTS + L1_VARIANTS + ("wf", "wf-fixed")


class SpecError(ValueError):
    """Invalid experiment description; ``violations`` lists every problem."""

    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)

    def to_json(self) -> str:
        return json.dumps({"error": "invalid experiment spec", "violations": self.violations}, indent=2)


def parse_solver(entry, errors: Optional[list] = None, where: str = "solvers"):
    """Turn ``"ccd"`` or ``{"name": "ccd", "max_cycles": 50, ...}`` into a config object."""
    own = errors is None
    errors = [] if own else errors
    if isinstance(entry, str):
        name, opts = entry, {}
    elif isinstance(entry, dict) and "name" in entry:
        opts = dict(entry)
        name = opts.pop("name")
    else:
        errors.append(f"{where}: expected a solver name or a mapping with 'name' (got {entry!r})")
        name, opts = None, {}
    config = None
    if name is not None:
        name = str(name).lower()
        try:
            if name in VARIANTS:
                config = SolverConfig(variant=name, **opts)
            elif name in L1_VARIANTS:
                config = L1Config(variant=name, **opts)
            elif name == "wf":
                config = WFConfig(**opts)
            elif name == "wf-fixed":
                opts.setdefault("step", None)
                config = WFConfig(**opts)
            else:
                errors.append(f"{where}: unknown solver {name!r}; choose from {', '.join(SOLVER_NAMES)}")
        except (TypeError, ValueError) as exc:
            errors.append(f"{where} ({name}): {exc}")
    if own and errors:
        raise SpecError(errors)
    return config


def solver_label(config) -> str:
    if isinstance(config, WFConfig):
        return "wf" if config.step == "exact" else "wf-fixed"
    return config.variant


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce one experiment.

    ``points`` is the sweep for curve experiments: M/N ratios for
    ``success-curve`` and SNRs in dB for ``nmse-curve``.
    """

    kind: str = "recover"
    N: int = 64
    M: int = 384
    K: Optional[int] = None
    snr_db: Optional[float] = None
    solvers: list = field(default_factory=lambda: ["ccd", "rcd", "gcd", "wf"])
    trials: int = 50
    base_seed: int = 0
    out: str = "results"
    workers: int = 1
    points: list = field(default_factory=list)
    spectral_iters: int = 200
    channel: list = field(default_factory=lambda: list(DEFAULT_CHANNEL))
    P: int = 16
    n_symbols: int = 2000
    init: str = "center"

    def validate(self) -> list:
        errors = []
        if self.kind not in KINDS:
            errors.append(f"kind: must be one of {', '.join(KINDS)} (got {self.kind!r})")
        for name in ("N", "M", "trials", "workers", "spectral_iters", "P", "n_symbols"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                errors.append(f"{name}: must be a positive integer (got {v!r})")
        if self.K is not None and (not isinstance(self.K, int) or not 1 <= self.K <= (self.N if isinstance(self.N, int) else self.K)):
            errors.append(f"K: must satisfy 1 <= K <= N (got {self.K!r})")
        if self.kind == "sparse" and self.K is None:
            errors.append("K: required for sparse experiments")
        if self.snr_db is not None and not isinstance(self.snr_db, (int, float)):
            errors.append(f"snr_db: must be a number or null (got {self.snr_db!r})")
        if not isinstance(self.base_seed, int) or not 0 <= self.base_seed < 2**64:
            errors.append(f"base_seed: must be an unsigned 64-bit integer (got {self.base_seed!r})")
        if not isinstance(self.solvers, list) or not self.solvers:
            errors.append("solvers: must be a non-empty list")
        else:
            for k, entry in enumerate(self.solvers):
                cfg = parse_solver(entry, errors, where=f"solvers[{k}]")
                if self.kind == "equalize" and isinstance(cfg, L1Config):
                    errors.append(f"solvers[{k}]: l1 solvers do not apply to equalization")
        if self.kind in ("success-curve", "nmse-curve"):
            if not isinstance(self.points, list) or not self.points:
                errors.append("points: curve experiments need a non-empty list of sweep values")
            elif not all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in self.points):
                errors.append(f"points: values must be numbers (got {self.points!r})")
            elif self.kind == "success-curve" and any(p <= 0 for p in self.points):
                errors.append("points: M/N ratios must be positive")
        if self.kind == "equalize":
            if not isinstance(self.channel, list) or not self.channel or not any(self.channel):
                errors.append("channel: needs at least one nonzero tap")
            if self.init not in ("center", "spectral"):
                errors.append(f"init: must be 'center' or 'spectral' (got {self.init!r})")
            if isinstance(self.P, int) and isinstance(self.n_symbols, int) and self.P > self.n_symbols:
                errors.append("P: equalizer longer than the symbol count")
        return errors

    def check(self) -> "ExperimentSpec":
        errors = self.validate()
        if errors:
            raise SpecError(errors)
        return self

    def solver_configs(self) -> list:
        return [parse_solver(e) for e in self.solvers]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise SpecError([f"{k}: unknown field" for k in unknown])
        return cls(**data)


def default_spec(kind: str = "recover") -> ExperimentSpec:
    """Default experiment setup for each kind."""
    spec = ExperimentSpec(kind=kind)
    if kind == "sparse":
        spec.M, spec.K = 128, 5
        spec.solvers = ["l1-ccd", "l1-rcd", "ccd", "wf"]
    elif kind == "equalize":
        spec.snr_db = 25.0
        spec.trials = 100
        spec.solvers = ["ccd", "rcd", "gcd", "wf"]
    elif kind == "success-curve":
        spec.points = [2, 3, 4, 5, 6]
        spec.trials = 200
    elif kind == "nmse-curve":
        spec.points = [6, 10, 14, 18, 22, 26, 30]
        spec.trials = 200
    return spec


def load_spec(path, kind: Optional[str] = None) -> ExperimentSpec:
    """Read a YAML config; omitted fields take the defaults of its kind.

    ``kind`` overrides the ``kind`` field of the file.
    """
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise SpecError(["config: top level must be a mapping"])
    kind = kind or data.get("kind", "recover")
    merged = asdict(default_spec(kind)) if kind in KINDS else {}
    merged.update(data)
    merged["kind"] = kind
    return ExperimentSpec.from_dict(merged)


@dataclass
class SummaryRecord:
    solver: str
    trial: int
    trial_seed: int
    point: Optional[float]
    cycles: int
    final_objective: float
    rel_error: Optional[float]
    success: bool
    wall_time: float
    final_isi: Optional[float] = None
    diverged: bool = False
    trace_file: Optional[str] = None


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _run_solver(config, ens, x0, x_ref):
    if isinstance(config, WFConfig):
        try:
            return wf_run(ens, x0, config, x_ref=x_ref) + (False,)
        except DivergenceError as exc:
            return None, exc.trace, True
    if isinstance(config, L1Config):
        return l1_run(ens, x0, config, x_ref=x_ref) + (False,)
    return run(ens, x0, config, x_ref=x_ref) + (False,)


def run_trial(spec: ExperimentSpec, trial: int, point=None, trace_dir: Optional[str] = None) -> list:
    """Run every solver on trial ``trial`` (and sweep value ``point``)."""
    trial_seed = derive_seed(spec.base_seed, trial)
    configs = spec.solver_configs()
    records = []
    tag = "" if point is None else f"_p{point:g}"
    if spec.kind == "equalize":
        for cfg in configs:
            t0 = time.perf_counter()
            res = equalize_run(spec.channel, spec.n_symbols, spec.P, spec.snr_db, cfg, seed=trial_seed, init=spec.init)
            wall = time.perf_counter() - t0
            records.append(_record(spec, cfg, trial, trial_seed, point, res.trace, wall, False, trace_dir, tag))
        return records

    gen = GenConfig(N=spec.N, M=spec.M, K=spec.K, snr_db=spec.snr_db)
    if spec.kind == "success-curve":
        gen.M = max(1, int(round(point * spec.N)))
    elif spec.kind == "nmse-curve":
        gen.snr_db = float(point)
    ens, x_true = make_instance(gen, seed=trial_seed)
    x0 = spectral_init(ens, SpectralConfig(power_iters=spec.spectral_iters, seed=derive_seed(trial_seed, 1)))
    for cfg in configs:
        cfg = copy.copy(cfg)
        if hasattr(cfg, "seed"):
            cfg.seed = derive_seed(trial_seed, 2)
        t0 = time.perf_counter()
        _, trace, diverged = _run_solver(cfg, ens, x0, x_true)
        wall = time.perf_counter() - t0
        records.append(_record(spec, cfg, trial, trial_seed, point, trace, wall, diverged, trace_dir, tag))
    return records


def _record(spec, cfg, trial, trial_seed, point, trace, wall, diverged, trace_dir, tag):
    label = solver_label(cfg)
    fname = None
    if trace_dir is not None:
        fname = f"{label}{tag}_trial{trial:04d}.csv"
        trace.to_csv(os.path.join(trace_dir, fname))
    err = trace.rel_error[-1] if trace.rel_error else float("nan")
    isi_v = trace.isi[-1] if trace.isi else float("nan")
    return SummaryRecord(
        solver=label,
        trial=trial,
        trial_seed=trial_seed,
        point=point,
        cycles=trace.cycles,
        final_objective=trace.objective[-1],
        rel_error=_clean(err),
        success=bool(math.isfinite(err) and err < SUCCESS_THRESHOLD),
        wall_time=wall,
        final_isi=_clean(isi_v),
        diverged=diverged,
        trace_file=fname,
    )


def _trial_job(args):
    spec, trial, point, trace_dir = args
    return run_trial(spec, trial, point, trace_dir)


def aggregate(records) -> list:
    """Per-solver (and per sweep point) success probability, NMSE, mean cycles
    and mean wall time. NMSE is the mean relative recovery error.
    """
    records = [r if isinstance(r, dict) else asdict(r) for r in records]
    if not records:
        raise ValueError("no records to aggregate")
    groups: dict = {}
    for r in records:
        groups.setdefault((r["solver"], r.get("point")), []).append(r)
    rows = []
    for (solver, point), rs in groups.items():
        errs = [r["rel_error"] for r in rs if r["rel_error"] is not None]
        isis = [r["final_isi"] for r in rs if r.get("final_isi") is not None]
        rows.append({
            "solver": solver,
            "point": point,
            "trials": len(rs),
            "success_probability": sum(bool(r["success"]) for r in rs) / len(rs),
            "nmse": float(np.mean(errs)) if errs else None,
            "mean_cycles": float(np.mean([r["cycles"] for r in rs])),
            "mean_wall_time": float(np.mean([r["wall_time"] for r in rs])),
            "mean_final_isi": float(np.mean(isis)) if isis else None,
        })
    return rows


def run_experiment(spec: ExperimentSpec, out: Optional[str] = None) -> dict:
    """Run the experiment, write traces and ``summary.json``, return the summary."""
    spec.check()
    out = out or spec.out
    trace_dir = os.path.join(out, "traces")
    os.makedirs(trace_dir, exist_ok=True)
    points = spec.points if spec.kind in ("success-curve", "nmse-curve") else [None]
    jobs = [(spec, t, p, trace_dir) for p in points for t in range(spec.trials)]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_trial_job, jobs))
    else:
        results = [_trial_job(j) for j in jobs]
    records = [r for rs in results for r in rs]
    order = {label: k for k, label in enumerate(solver_label(c) for c in spec.solver_configs())}
    records.sort(key=lambda r: (r.point if r.point is not None else 0, r.trial, order.get(r.solver, 0)))
    summary = {
        "spec": asdict(spec),
        "success_threshold": SUCCESS_THRESHOLD,
        "metrics": aggregate(records),
        "records": [asdict(r) for r in records],
    }
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary
