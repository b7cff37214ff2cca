"""Finite-difference solver for ``-Lap(u) + q u = f`` with ``u = 0`` on the boundary,
observation data and the data-misfit functional."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .discretization import Field, Grid, Grid1D, Grid2D, GridError


class ForwardSolveError(RuntimeError):
    """The discrete boundary-value problem could not be solved."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def solve_tridiagonal(lower, diag, upper, rhs):
    """Thomas algorithm for a tridiagonal system.

    ``lower[i]`` multiplies ``x[i]`` in row ``i + 1`` and ``upper[i]`` multiplies
    ``x[i + 1]`` in row ``i`` (both have length ``n - 1``).
    """
    diag = np.asarray(diag, dtype=float)
    n = diag.size
    c = np.empty(max(n - 1, 0))
    d = np.empty(n)
    pivot = diag[0]
    if pivot == 0.0:
        raise ForwardSolveError("zero pivot in tridiagonal elimination at row 0")
    if n > 1:
        c[0] = upper[0] / pivot
    d[0] = rhs[0] / pivot
    for i in range(1, n):
        pivot = diag[i] - lower[i - 1] * c[i - 1]
        if pivot == 0.0:
            raise ForwardSolveError(f"zero pivot in tridiagonal elimination at row {i}")
        if i < n - 1:
            c[i] = upper[i] / pivot
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / pivot
    x = d
    for i in range(n - 2, -1, -1):
        x[i] -= c[i] * x[i + 1]
    return x


@dataclass(frozen=True)
class SourceTerm:
    """Right-hand side ``f``: either a callable of the coordinates or tabulated knot values."""

    func: Optional[Callable] = None
    values: Optional[np.ndarray] = None
    name: str = "custom"

    def __post_init__(self):
        if (self.func is None) == (self.values is None):
            raise ValueError("provide exactly one of func or values")

    @classmethod
    def constant(cls, c: float = 1.0) -> "SourceTerm":
        return cls(func=lambda *xs: np.full(np.shape(xs[0]), float(c)), name=f"constant({c:g})")

    def on(self, grid: Grid) -> np.ndarray:
        if self.values is not None:
            out = np.asarray(self.values, dtype=float)
            if out.shape != grid.shape:
                raise GridError(f"tabulated source has shape {out.shape}, grid {grid.shape}")
        elif grid.ndim == 1:
            out = np.asarray(self.func(grid.knots), dtype=float)
        else:
            out = np.asarray(self.func(*grid.mesh()), dtype=float)
        out = np.broadcast_to(out, grid.shape).astype(float)
        if not np.all(np.isfinite(out)):
            raise ValueError("source term is not finite at every knot")
        return out


def _values(q, grid: Grid) -> np.ndarray:
    arr = q.values if isinstance(q, Field) else np.asarray(q, dtype=float)
    if arr.shape != grid.shape:
        raise GridError(f"coefficient shape {arr.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(arr)):
        raise ForwardSolveError("non-finite coefficient values")
    return arr


class ForwardModel1D:
    """Reusable 1D solver: the stencil and load vector are built once per grid."""

    def __init__(self, grid: Grid1D, f: SourceTerm):
        self.grid = grid
        self.rhs = f.on(grid)[1:-1]
        n = grid.m - 1
        inv_h2 = 1.0 / grid.h**2
        self._off = np.full(max(n - 1, 0), -inv_h2)
        self._diag = np.full(n, 2.0 * inv_h2)

    def solve_values(self, q: np.ndarray) -> np.ndarray:
        u = np.zeros(self.grid.shape)
        u[1:-1] = solve_tridiagonal(self._off, self._diag + q[1:-1], self._off, self.rhs)
        if not np.all(np.isfinite(u)):
            raise ForwardSolveError("non-finite forward solution")
        return u


class ForwardModel2D:
    """Reusable 2D solver for the 5-point stencil plus diagonal reaction term."""

    def __init__(self, grid: Grid2D, f: SourceTerm):
        self.grid = grid
        nx, ny = grid.mx - 2, grid.my - 2
        if nx < 1 or ny < 1:
            raise GridError("2D grid needs at least one interior knot per axis")
        tx = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(nx, nx)) / grid.hx**2
        ty = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(ny, ny)) / grid.hy**2
        self._lap = (sp.kron(tx, sp.identity(ny)) + sp.kron(sp.identity(nx), ty)).tocsc()
        self._lap.sort_indices()
        self._diag_pos = _diagonal_positions(self._lap)
        self.rhs = f.on(grid)[1:-1, 1:-1].ravel()
        self._shape = (nx, ny)

    def operator(self, q: np.ndarray) -> sp.csc_matrix:
        A = self._lap.copy()
        A.data[self._diag_pos] += q[1:-1, 1:-1].ravel()
        return A

    def solve_values(self, q: np.ndarray) -> np.ndarray:
        A = self.operator(q)
        with np.errstate(all="ignore"):
            try:
                inner = spsolve(A, self.rhs, permc_spec="MMD_AT_PLUS_A")
            except RuntimeError as exc:  # SuperLU reports singular factors this way
                raise ForwardSolveError(f"sparse solve failed: {exc}") from exc
        if not np.all(np.isfinite(inner)):
            raise ForwardSolveError("non-finite forward solution")
        residual = np.linalg.norm(A @ inner - self.rhs) / max(np.linalg.norm(self.rhs), 1e-300)
        if residual > 1e-10:
            raise ForwardSolveError(
                f"sparse solve residual {residual:.3e} exceeds 1e-10", residual=residual
            )
        u = np.zeros(self.grid.shape)
        u[1:-1, 1:-1] = inner.reshape(self._shape)
        return u


def _diagonal_positions(A: sp.csc_matrix) -> np.ndarray:
    pos = np.empty(A.shape[0], dtype=np.int64)
    for j in range(A.shape[1]):
        rows = A.indices[A.indptr[j]:A.indptr[j + 1]]
        pos[j] = A.indptr[j] + int(np.flatnonzero(rows == j)[0])
    return pos


def forward_model(grid: Grid, f: SourceTerm):
    return ForwardModel1D(grid, f) if grid.ndim == 1 else ForwardModel2D(grid, f)


def _check_admissible(q: np.ndarray):
    if np.any(q < 0):
        raise ValueError("the potential must be nonnegative at every knot")


def solve_forward_1d(grid: Grid1D, q, f: SourceTerm) -> Field:
    """Centered-difference solution with homogeneous Dirichlet data at both ends."""
    values = _values(q, grid)
    _check_admissible(values)
    return Field(grid, ForwardModel1D(grid, f).solve_values(values))


def solve_forward_2d(grid: Grid2D, q, f: SourceTerm) -> Field:
    values = _values(q, grid)
    _check_admissible(values)
    return Field(grid, ForwardModel2D(grid, f).solve_values(values))


def solve_forward(grid: Grid, q, f: SourceTerm) -> Field:
    if grid.ndim == 1:
        return solve_forward_1d(grid, q, f)
    return solve_forward_2d(grid, q, f)


@dataclass(frozen=True)
class ObservationData:
    """Noisy point observations ``u + sigma * xi`` at flat knot indices of ``grid``."""

    grid: Grid
    locations: np.ndarray
    values: np.ndarray
    noise_sigma: float
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=np.int64)
        val = np.asarray(self.values, dtype=float)
        if loc.shape != val.shape or loc.ndim != 1:
            raise ValueError("locations and values must be 1D arrays of equal length")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if loc.size and (loc.min() < 0 or loc.max() >= self.grid.n_knots):
            raise ValueError("observation index outside the grid")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "values", val)

    def to_csv(self, path=None) -> str:
        """Write ``index, x[, y], value`` rows; sigma and seed go in comment lines."""
        buf = io.StringIO()
        buf.write(f"# sigma={self.noise_sigma!r}\n")
        buf.write(f"# seed={self.seed}\n")
        coords = self.grid.coordinates()[self.locations]
        writer = csv.writer(buf, lineterminator="\n")
        cols = ["index", "x"] + (["y"] if self.grid.ndim == 2 else []) + ["value"]
        writer.writerow(cols)
        for k, idx in enumerate(self.locations):
            writer.writerow([int(idx), *(repr(float(c)) for c in coords[k]), repr(float(self.values[k]))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path, grid: Grid) -> "ObservationData":
        sigma, seed = None, None
        rows = []
        with open(path, newline="") as fh:
            for line in fh:
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition("=")
                    if key == "sigma":
                        sigma = float(value)
                    elif key == "seed":
                        seed = None if value == "None" else int(value)
                else:
                    rows.append(line)
        reader = csv.DictReader(rows)
        records = list(reader)
        if sigma is None:
            raise ValueError(f"{path}: missing '# sigma=' header")
        return cls(
            grid,
            np.array([int(r["index"]) for r in records], dtype=np.int64),
            np.array([float(r["value"]) for r in records]),
            sigma,
            seed,
        )


def observation_indices(grid: Grid, stride: int = 1) -> np.ndarray:
    """Flat indices of the observed interior knots, optionally subsampled by ``stride``."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if grid.ndim == 1:
        return grid.interior()[::stride]
    mask = np.zeros(grid.shape, dtype=bool)
    mask[1:-1:stride, 1:-1:stride] = True
    return np.flatnonzero(mask)


def _coarse_positions(fine: Grid, coarse: Grid, factor: int) -> np.ndarray:
    # flat fine-grid index of every coarse knot
    if fine != coarse.refine(factor):
        raise GridError("generation grid must be the refinement of the inversion grid")
    if coarse.ndim == 1:
        return np.arange(coarse.n_knots) * factor
    i, j = np.meshgrid(np.arange(coarse.mx) * factor, np.arange(coarse.my) * factor, indexing="ij")
    return (i * fine.my + j).ravel()


def generate_data(
    q_true: Field,
    f: SourceTerm,
    noise_rel: float,
    seed: int,
    stride: int = 1,
    coarse_grid: Optional[Grid] = None,
    refinement: int = 2,
) -> ObservationData:
    """Synthetic observations with per-component noise ``noise_rel * RMS(u)``.

    When ``coarse_grid`` is given, ``q_true`` lives on its ``refinement``-times finer
    grid; the state is solved there and restricted to the coarse knots, and the
    returned data refers to ``coarse_grid``.
    """
    if noise_rel < 0:
        raise ValueError("noise_rel must be nonnegative")
    grid = q_true.grid
    u = forward_model(grid, f).solve_values(q_true.values)
    target = grid if coarse_grid is None else coarse_grid
    locations = observation_indices(target, stride)
    if coarse_grid is None:
        exact = u.ravel()[locations]
    else:
        exact = u.ravel()[_coarse_positions(grid, coarse_grid, refinement)][locations]
    rms = np.linalg.norm(exact) / np.sqrt(exact.size)
    sigma = float(noise_rel * rms)
    rng = np.random.default_rng(seed)
    noisy = exact + sigma * rng.standard_normal(exact.size)
    return ObservationData(target, locations, noisy, sigma, seed, meta={"noise_rel": noise_rel})


class Misfit:
    """``q -> 0.5 * ||(G(q) - u_obs) / sigma||^2`` with the solver prepared once."""

    def __init__(self, data: ObservationData, f: SourceTerm):
        if data.noise_sigma <= 0:
            raise ValueError("misfit weighting requires noise_sigma > 0")
        self.data = data
        self.model = forward_model(data.grid, f)

    def residual(self, q: np.ndarray) -> np.ndarray:
        u = self.model.solve_values(q)
        return (u.ravel()[self.data.locations] - self.data.values) / self.data.noise_sigma

    def __call__(self, q: np.ndarray) -> float:
        r = self.residual(q)
        value = 0.5 * float(r @ r)
        if not np.isfinite(value):
            raise ForwardSolveError("non-finite misfit")
        return value


def misfit(q, data: ObservationData, f: SourceTerm) -> float:
    values = _values(q, data.grid)
    return Misfit(data, f)(values)


def misfit_from_residual(residual, sigma: float) -> float:
    """``0.5 * ||residual / sigma||^2`` for a precomputed residual vector."""
    r = np.asarray(residual, dtype=float) / sigma
    return 0.5 * float(r @ r)


__all__ = [
    "ForwardSolveError", "SourceTerm", "ObservationData", "ForwardModel1D", "ForwardModel2D",
    "solve_tridiagonal", "solve_forward_1d", "solve_forward_2d", "solve_forward",
    "generate_data", "observation_indices", "misfit", "Misfit", "misfit_from_residual",
    "forward_model",
]
