"""Preconditioned Crank-Nicolson Metropolis-Hastings on a discretized field."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .discretization import Field, Grid
from .forward import ForwardSolveError
from .prior import FactorizedCovariance

TRANSFORMS = ("identity", "exponential")


class SamplerError(RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


def _zero(q):
    return 0.0


@dataclass
class PotentialSpec:
    """``phi = misfit(q) + regularizer(q)`` with ``q = transform(g)``.

    The hooks take the physical field values (a numpy array shaped like the
    grid); the sampler moves the latent Gaussian field ``g``.
    """

    misfit: Callable[[np.ndarray], float] = _zero
    regularizer: Callable[[np.ndarray], float] = _zero
    transform: str = "identity"

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}; expected one of {TRANSFORMS}")

    @property
    def is_zero(self) -> bool:
        return self.misfit is _zero and self.regularizer is _zero

    def physical(self, g: np.ndarray) -> np.ndarray:
        return np.exp(g) if self.transform == "exponential" else g

    def latent(self, q: np.ndarray) -> np.ndarray:
        if self.transform == "exponential":
            q = np.asarray(q, dtype=float)
            if np.any(q <= 0):
                raise ValueError("exponential transform needs a strictly positive field")
            return np.log(q)
        return np.asarray(q, dtype=float)

    def __call__(self, g: np.ndarray) -> float:
        q = self.physical(g)
        return float(self.misfit(q)) + float(self.regularizer(q))


@dataclass
class Chain:
    """Record of a pCN run.

    ``potentials`` and ``accept_flags`` have one entry per step ``1..N``.
    ``states`` holds the stored latent states; ``state_steps`` their 1-based
    step numbers.
    """

    rho: float
    N: int
    seed: int
    potentials: np.ndarray
    accept_flags: np.ndarray
    states: np.ndarray
    state_steps: np.ndarray
    grid: Grid
    transform: str = "identity"
    initial_potential: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accept_flags)) if self.accept_flags.size else 0.0


@dataclass(frozen=True)
class PosteriorSummary:
    mean: Field
    std: Field
    acceptance_rate: float
    n_retained: int

    def to_csv(self, path=None) -> str:
        """``index, x[, y], mean, std`` per knot, row-major in 2D."""
        grid = self.mean.grid
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "x"] + (["y"] if grid.ndim == 2 else []) + ["mean", "std"])
        coords = grid.coordinates()
        mean, std = self.mean.values.ravel(), self.std.values.ravel()
        for k in range(grid.n_knots):
            writer.writerow([k, *(repr(float(c)) for c in coords[k]),
                             repr(float(mean[k])), repr(float(std[k]))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def pcn_propose(current, rho: float, xi):
    """``sqrt(1 - rho^2) * current + rho * xi``."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    if isinstance(current, Field):
        return current.with_values(pcn_propose(current.values, rho, np.asarray(
            xi.values if isinstance(xi, Field) else xi)))
    return math.sqrt(1.0 - rho * rho) * np.asarray(current) + rho * np.asarray(xi)


def accept_probability(phi_current: float, phi_proposal: float) -> float:
    if phi_proposal <= phi_current:
        return 1.0
    return math.exp(phi_current - phi_proposal)


def mh_accept(phi_current: float, phi_proposal: float, u: float) -> bool:
    """Accept iff ``min(1, exp(phi_current - phi_proposal)) > u``."""
    return accept_probability(phi_current, phi_proposal) > u


def retained_steps(N: int, burn_in_fraction: float = 0.5, lag: int = 5) -> np.ndarray:
    """1-based steps kept after discarding ``ceil(burn_in_fraction * N)`` and thinning."""
    if not 0.0 <= burn_in_fraction < 1.0:
        raise ValueError("burn_in_fraction must lie in [0, 1)")
    if lag < 1:
        raise ValueError("lag must be >= 1")
    first = math.ceil(burn_in_fraction * N) + 1
    return np.arange(first, N + 1, lag)


def run_chain(
    potential: PotentialSpec,
    cov: FactorizedCovariance,
    rho: float,
    N: int,
    seed: int,
    burn_in_fraction: float = 0.5,
    lag: int = 5,
    store: str = "thinned",
    initial: Optional[np.ndarray] = None,
    block: int = 256,
) -> Chain:
    """Run ``N`` pCN steps from the zero field (or ``initial``, given in physical units).

    ``store="thinned"`` keeps only the states that ``summarize`` will use with
    the same ``burn_in_fraction`` and ``lag``; ``store="all"`` keeps every state.
    Proposals whose forward solve fails count as infinite potential and are
    rejected; a NaN potential aborts the run.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    if store not in ("thinned", "all"):
        raise ValueError("store must be 'thinned' or 'all'")
    grid = cov.grid
    xi_seq, u_seq = np.random.SeedSequence(seed).spawn(2)
    xi_rng, u_rng = np.random.default_rng(xi_seq), np.random.default_rng(u_seq)

    g = np.zeros(grid.shape) if initial is None else potential.latent(initial).reshape(grid.shape)
    phi = _evaluate(potential, g, 0)
    if not np.isfinite(phi):
        raise SamplerError("initial state has non-finite potential", step=0)
    phi0 = phi

    keep = retained_steps(N, burn_in_fraction, lag) if store == "thinned" else np.arange(1, N + 1)
    states = np.empty((keep.size, *grid.shape))
    keep_mask = np.zeros(N + 1, dtype=bool)
    keep_mask[keep] = True
    potentials = np.empty(N)
    flags = np.zeros(N, dtype=bool)
    a = math.sqrt(1.0 - rho * rho)
    uniforms = u_rng.random(N)
    zero = potential.is_zero
    slot = 0
    xis = None
    for n in range(1, N + 1):
        j = (n - 1) % block
        if j == 0:
            xis = cov.sample_values(xi_rng, size=min(block, N - n + 1))
        proposal = a * g + rho * xis[j]
        phi_new = 0.0 if zero else _evaluate(potential, proposal, n)
        if mh_accept(phi, phi_new, uniforms[n - 1]):
            g, phi = proposal, phi_new
            flags[n - 1] = True
        potentials[n - 1] = phi
        if keep_mask[n]:
            states[slot] = g
            slot += 1

    return Chain(
        rho=rho, N=N, seed=seed, potentials=potentials, accept_flags=flags,
        states=states, state_steps=keep, grid=grid, transform=potential.transform,
        initial_potential=phi0,
        meta={"burn_in_fraction": burn_in_fraction, "lag": lag, "store": store},
    )


def _evaluate(potential: PotentialSpec, g: np.ndarray, step: int) -> float:
    try:
        value = potential(g)
    except ForwardSolveError:
        return math.inf
    if math.isnan(value) or value == -math.inf:
        raise SamplerError(f"non-finite potential {value} at step {step}", step=step)
    return value


def summarize(chain: Chain, burn_in_fraction: float = 0.5, lag: int = 5) -> PosteriorSummary:
    """Posterior mean and per-knot standard deviation of the physical field over
    the retained states."""
    steps = retained_steps(chain.N, burn_in_fraction, lag)
    if steps.size == 0:
        raise SamplerError("no states retained after burn-in and thinning")
    where = np.searchsorted(chain.state_steps, steps)
    if np.any(where >= chain.state_steps.size) or np.any(chain.state_steps[np.minimum(
            where, chain.state_steps.size - 1)] != steps):
        raise SamplerError(
            "the chain did not store the requested states; rerun with matching "
            "burn-in/lag or store='all'"
        )
    latent = chain.states[where]
    q = np.exp(latent) if chain.transform == "exponential" else latent
    mean = q.mean(axis=0)
    std = q.std(axis=0)
    return PosteriorSummary(
        mean=Field(chain.grid, mean),
        std=Field(chain.grid, std),
        acceptance_rate=chain.acceptance_rate,
        n_retained=int(steps.size),
    )
