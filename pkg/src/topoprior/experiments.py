"""End-to-end benchmark runs: data generation, potential assembly, sampling,
summaries and CSV emission."""

from __future__ import annotations

import csv
import io
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from . import topology
from .config import ExperimentConfig
from .discretization import Field, Grid, default_grid, target_example, weierstrass_truncated
from .forward import Misfit, ObservationData, SourceTerm, generate_data
from .prior import KernelSpec, build_covariance
from .sampler import Chain, PosteriorSummary, PotentialSpec, run_chain, summarize

logger = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """A module error annotated with the pipeline stage it came from."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage
        self.cause = exc


@dataclass
class RunReport:
    error: float
    acceptance_rate: float
    duration: float
    paths: Dict[str, str] = field(default_factory=dict)
    summary: Optional[PosteriorSummary] = field(default=None, repr=False)
    chain: Optional[Chain] = field(default=None, repr=False)


def relative_error(estimate, exact) -> float:
    """``||estimate - exact||_2 / ||exact||_2`` over the knots."""
    est = estimate.values if isinstance(estimate, Field) else np.asarray(estimate)
    ref = exact.values if isinstance(exact, Field) else np.asarray(exact)
    return float(np.linalg.norm(est - ref) / np.linalg.norm(ref))


def exact_target(cfg: ExperimentConfig, grid: Grid) -> Field:
    if cfg.example == 4:
        w = weierstrass_truncated(grid.knots, cfg.weierstrass_a, cfg.weierstrass_b, cfg.weierstrass_K)
        return Field(grid, 2.0 / np.pi * np.arctan(w) + 1.0)
    return target_example(cfg.example, grid)


def kernel_spec(cfg: ExperimentConfig) -> KernelSpec:
    if cfg.prior == "spectral_laplacian":
        return KernelSpec(cfg.prior, s=cfg.s)
    if cfg.prior == "periodic_squared_exponential":
        return KernelSpec(cfg.prior, l=cfg.l, p=cfg.p)
    return KernelSpec(cfg.prior, l=cfg.l)


def make_regularizer(cfg: ExperimentConfig, grid: Grid):
    if cfg.regularizer == "none" or cfg.lam == 0:
        return None
    power = cfg.weight_form == "power"
    if cfg.regularizer == "tp":
        if grid.ndim == 1:
            return lambda q: topology.tp_regularizer_1d(q, cfg.theta, cfg.beta, cfg.lam, power)
        return lambda q: topology.tp_regularizer_2d(q, cfg.theta, cfg.beta, cfg.lam, power)
    if grid.ndim == 1:
        return lambda q: topology.tv_regularizer(q, cfg.lam)
    return lambda q: topology.tv_regularizer(q, cfg.lam, grid.hx, grid.hy)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:  # annotate and re-raise
        raise PipelineError(name, exc) from exc


def prepare(cfg: ExperimentConfig):
    """Grid, exact target, observations and the potential for ``cfg``."""
    grid = default_grid(cfg.example, cfg.m)
    q_true = exact_target(cfg, grid)
    f = SourceTerm.constant(cfg.source)
    if cfg.refinement > 1:
        fine = grid.refine(cfg.refinement)
        data = _stage("data", generate_data, exact_target(cfg, fine), f, cfg.noise_rel, cfg.seed,
                      cfg.stride, coarse_grid=grid, refinement=cfg.refinement)
    else:
        data = _stage("data", generate_data, q_true, f, cfg.noise_rel, cfg.seed, cfg.stride)
    return grid, q_true, f, data


def build_potential(cfg: ExperimentConfig, data: ObservationData, f: SourceTerm) -> PotentialSpec:
    reg = make_regularizer(cfg, data.grid)
    kwargs = {"transform": cfg.transform}
    if data.noise_sigma > 0:
        kwargs["misfit"] = Misfit(data, f)
    else:
        # exact data: weight by a unit sigma so the potential stays finite
        kwargs["misfit"] = Misfit(ObservationData(data.grid, data.locations, data.values, 1.0,
                                                  data.seed), f)
    if reg is not None:
        kwargs["regularizer"] = reg
    return PotentialSpec(**kwargs)


def run_experiment(cfg: ExperimentConfig, emit: bool = True, initial=None) -> RunReport:
    start = time.perf_counter()
    grid, q_true, f, data = prepare(cfg)
    cov = _stage("prior", build_covariance, kernel_spec(cfg), grid)
    potential = _stage("potential", build_potential, cfg, data, f)
    logger.info("running %s: N=%d rho=%g regularizer=%s", cfg.name, cfg.N, cfg.rho, cfg.regularizer)
    chain = _stage("sampler", run_chain, potential, cov, cfg.rho, cfg.N, cfg.seed,
                   cfg.burn_in, cfg.lag, initial=initial)
    summary = _stage("summary", summarize, chain, cfg.burn_in, cfg.lag)
    err = relative_error(summary.mean, q_true)
    paths = {}
    if emit:
        paths = _stage("output", emit_outputs, summary, q_true, cfg.out, cfg=cfg, data=data,
                       chain=chain, error=err)
    return RunReport(err, summary.acceptance_rate, time.perf_counter() - start, paths, summary, chain)


def _reconstruction_csv(summary: PosteriorSummary, q_true: Field) -> str:
    grid = q_true.grid
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow((["x"] if grid.ndim == 1 else ["x", "y"]) + ["q_true", "q_mean", "q_std"])
    coords = grid.coordinates()
    cols = [q_true.values.ravel(), summary.mean.values.ravel(), summary.std.values.ravel()]
    for k in range(grid.n_knots):
        writer.writerow([repr(float(c)) for c in coords[k]] + [repr(float(c[k])) for c in cols])
    return buf.getvalue()


def metadata(cfg: Optional[ExperimentConfig], chain: Optional[Chain], summary: PosteriorSummary,
             error: Optional[float]) -> str:
    """Plain ``key=value`` run sidecar (no timings, so reruns are byte-identical)."""
    items = []
    if cfg is not None:
        items.append(("preset", cfg.name))
        items.extend(cfg.flat().items())
    if chain is not None:
        items.extend([("chain.N", chain.N), ("chain.rho", chain.rho), ("chain.seed", chain.seed)])
    items.extend([("acceptance_rate", repr(summary.acceptance_rate)),
                  ("retained", summary.n_retained)])
    if error is not None:
        items.append(("relative_error", repr(error)))
    return "".join(f"{k}={v}\n" for k, v in items)


def emit_outputs(summary: PosteriorSummary, q_true: Field, dir: str, cfg=None, data=None,
                 chain=None, error=None) -> Dict[str, str]:
    """Write reconstruction, summary, persistence-diagram and metadata files into ``dir``."""
    if not dir:
        raise ValueError("output directory path is empty")
    try:
        os.makedirs(dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{dir}: cannot create output directory: {exc}") from exc
    paths = {
        "reconstruction": os.path.join(dir, "reconstruction.csv"),
        "summary": os.path.join(dir, "summary.csv"),
        "pairs": os.path.join(dir, "pairs.csv"),
        "metadata": os.path.join(dir, "run.meta"),
    }
    mean = summary.mean.values
    texts = {
        "reconstruction": _reconstruction_csv(summary, q_true),
        "summary": summary.to_csv(),
        "pairs": topology.pair_full(mean).to_csv() if mean.ndim == 1 else topology.pairs_2d_csv(mean),
        "metadata": metadata(cfg, chain, summary, error),
    }
    if data is not None:
        paths["data"] = os.path.join(dir, "data.csv")
        texts["data"] = data.to_csv()
    for key, path in paths.items():
        try:
            with open(path, "w", newline="") as fh:
                fh.write(texts[key])
        except OSError as exc:
            raise OSError(f"{path}: {exc}") from exc
    return paths
