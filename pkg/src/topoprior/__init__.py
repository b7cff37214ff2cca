"""Bayesian recovery of the potential in ``-Lap(u) + q u = f`` with Gaussian,
TV-Gaussian and topological (persistence-pair) Gaussian hybrid priors."""

from .discretization import (
    Field, Grid1D, Grid2D, GridError, make_grid_1d, make_grid_2d, target_example,
    weierstrass_truncated,
)
from .forward import (
    ForwardSolveError, Misfit, ObservationData, SourceTerm, generate_data, misfit,
    solve_forward_1d, solve_forward_2d,
)
from .prior import CovarianceError, FactorizedCovariance, KernelSpec, build_covariance, kernel_value, sample_prior
from .topology import (
    ExtremaReport, PairSet, PersistencePair, classify_extrema, discrete_tv, pair_algorithm2,
    pair_full, persistence_distance, tp_regularizer_1d, tp_regularizer_2d, tp_weight,
    tv_regularizer,
)
from .sampler import (
    Chain, PosteriorSummary, PotentialSpec, SamplerError, mh_accept, pcn_propose, run_chain,
    summarize,
)
from .config import ConfigError, ExperimentConfig, load_config, preset
from .experiments import RunReport, emit_outputs, relative_error, run_experiment

__version__ = "0.1.0"
