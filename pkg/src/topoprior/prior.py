"""Gaussian reference measures: kernel Gram matrices, the Dirichlet spectral
covariance ``(-Lap)^(-s)``, their square-root factors and exact sampling."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .discretization import Field, Grid

logger = logging.getLogger(__name__)

KERNEL_KINDS = ("squared_exponential", "periodic_squared_exponential", "spectral_laplacian")

JITTER_START = 1e-12
JITTER_MAX = 1e-6


class CovarianceError(RuntimeError):
    """The covariance could not be factorized."""

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    l: Optional[float] = None
    p: Optional[float] = None
    s: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown covariance kind {self.kind!r}; expected one of {KERNEL_KINDS}")
        if self.kind in KERNEL_KINDS[:2] and not (self.l is not None and self.l > 0):
            raise ValueError(f"{self.kind} needs a length-scale l > 0")
        if self.kind == "periodic_squared_exponential" and not (self.p is not None and self.p > 0):
            raise ValueError("periodic kernel needs a period p > 0")
        if self.kind == "spectral_laplacian" and not (self.s is not None and self.s > 0):
            raise ValueError("spectral covariance needs an exponent s > 0")


def _kernel(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    if spec.kind == "squared_exponential":
        return np.exp(-(r**2) / (2.0 * spec.l**2))
    if spec.kind == "periodic_squared_exponential":
        return np.exp(-2.0 * np.sin(np.pi * r / spec.p) ** 2 / spec.l**2)
    raise NotImplementedError("the spectral covariance has no pointwise kernel")


def kernel_value(spec: KernelSpec, x, y) -> float:
    """Kernel evaluated at two points (scalars or coordinate vectors)."""
    r = np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
    return float(_kernel(spec, r))


@dataclass(frozen=True)
class FactorizedCovariance:
    """Square-root factor ``L`` (shape ``n_knots x rank``) with ``C0 = L L^T``.

    For kernel covariances ``L`` is the lower Cholesky factor of the Gram matrix
    plus ``jitter * I``; for the spectral covariance its columns are
    ``sqrt(eigenvalue) * eigenvector`` so ``jitter`` is zero.
    """

    grid: Grid
    spec: KernelSpec
    factor: np.ndarray = field(repr=False)
    jitter: float = 0.0
    eigenvalues: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    def matrix(self) -> np.ndarray:
        return self.factor @ self.factor.T

    def diagonal(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.factor, self.factor)

    def sample_values(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        """Draw values shaped like the grid, or ``(size, *grid.shape)`` when batched."""
        if size is None:
            z = rng.standard_normal(self.rank)
            return (self.factor @ z).reshape(self.grid.shape)
        z = rng.standard_normal((self.rank, size))
        return (self.factor @ z).T.reshape((size, *self.grid.shape))


def _gram(spec: KernelSpec, grid: Grid) -> np.ndarray:
    if spec.kind == "periodic_squared_exponential" and grid.ndim != 1:
        raise ValueError("the periodic kernel is only offered on 1D grids")
    pts = grid.coordinates()
    diff = pts[:, None, :] - pts[None, :, :]
    r = np.sqrt(np.sum(diff**2, axis=-1))
    return _kernel(spec, r)


def _cholesky_with_jitter(K: np.ndarray) -> tuple[np.ndarray, float]:
    scale = float(np.max(np.diag(K)))
    rel = JITTER_START
    while rel <= JITTER_MAX * (1 + 1e-9):
        jitter = rel * scale
        try:
            L = scipy.linalg.cholesky(K + jitter * np.eye(K.shape[0]), lower=True, check_finite=False)
            return L, jitter
        except np.linalg.LinAlgError:
            rel *= 10.0
    raise CovarianceError(
        f"Cholesky failed with jitter up to {JITTER_MAX * scale:.1e}", jitter=JITTER_MAX * scale
    )


def _sine_modes(a: float, b: float, n_knots: int) -> tuple[np.ndarray, np.ndarray]:
    # orthonormal Dirichlet sine modes at the knots, k = 1 .. n_knots - 2
    length = b - a
    m = n_knots - 1
    k = np.arange(1, m)
    j = np.arange(n_knots)
    phi = np.sqrt(2.0 / length) * np.sin(np.pi * np.outer(j, k) / m)
    phi[0, :] = 0.0
    phi[-1, :] = 0.0
    return phi, k * np.pi / length


def _spectral(spec: KernelSpec, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    if grid.ndim == 1:
        phi, freq = _sine_modes(grid.a, grid.b, grid.n_knots)
        lam = freq ** (-2.0 * spec.s)
        return phi * np.sqrt(lam), lam
    phx, fx = _sine_modes(grid.ax, grid.bx, grid.mx)
    phy, fy = _sine_modes(grid.ay, grid.by, grid.my)
    lam = (fx[:, None] ** 2 + fy[None, :] ** 2) ** (-spec.s)
    modes = np.kron(phx, phy)  # column (k, j) -> k * len(fy) + j
    return modes * np.sqrt(lam.ravel()), lam.ravel()


def build_covariance(spec: KernelSpec, grid: Grid) -> FactorizedCovariance:
    """Discretize the prior covariance on the knots of ``grid`` and factor it.

    Kernel kinds: Gram matrix plus jitter, starting at ``1e-12 * max(diag)`` and
    escalating tenfold up to ``1e-6`` until Cholesky succeeds.
    """
    if spec.kind == "spectral_laplacian":
        factor, lam = _spectral(spec, grid)
        return FactorizedCovariance(grid, spec, factor, 0.0, lam)
    K = _gram(spec, grid)
    L, jitter = _cholesky_with_jitter(K)
    if jitter > JITTER_START * np.max(np.diag(K)):
        logger.info("covariance %s factorized with jitter %.1e", spec.kind, jitter)
    return FactorizedCovariance(grid, spec, L, jitter)


def sample_prior(cov: FactorizedCovariance, rng: np.random.Generator) -> Field:
    return Field(cov.grid, cov.sample_values(rng))
