"""Uniform grids, piecewise-linear fields and the exact benchmark targets.

Index layout for 2D fields is fixed: ``values[i, j] = q(x_i, y_j)``, so row
``i`` holds a fixed x-coordinate and flattening is C order
(``flat = i * ny + j``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np


class GridError(ValueError):
    """Invalid grid construction or grid/field mismatch."""


@dataclass(frozen=True)
class Grid1D:
    """Uniform partition ``a = x_0 < ... < x_m = b``."""

    a: float
    b: float
    m: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.b <= self.a:
            raise GridError(f"invalid bounds a={self.a}, b={self.b}")
        if int(self.m) != self.m or self.m < 2:
            raise GridError(f"m must be an integer >= 2, got {self.m}")

    ndim = 1

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.m

    @property
    def n_knots(self) -> int:
        return self.m + 1

    @property
    def shape(self) -> tuple[int]:
        return (self.m + 1,)

    @property
    def knots(self) -> np.ndarray:
        x = self.a + self.h * np.arange(self.m + 1)
        # endpoints exact regardless of rounding in h
        x[0], x[-1] = self.a, self.b
        return x

    def coordinates(self) -> np.ndarray:
        """Knot coordinates as an ``(n_knots, 1)`` array."""
        return self.knots[:, None]

    def interior(self) -> np.ndarray:
        return np.arange(1, self.m)

    def refine(self, factor: int = 2) -> "Grid1D":
        return Grid1D(self.a, self.b, self.m * factor)


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid on ``[ax, bx] x [ay, by]`` with ``mx`` by ``my`` knots."""

    ax: float
    bx: float
    ay: float
    by: float
    mx: int
    my: int

    def __post_init__(self):
        for lo, hi in ((self.ax, self.bx), (self.ay, self.by)):
            if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
                raise GridError(f"invalid bounds ({lo}, {hi})")
        for n in (self.mx, self.my):
            if int(n) != n or n < 2:
                raise GridError(f"knot counts must be integers >= 2, got {n}")

    ndim = 2

    @property
    def hx(self) -> float:
        return (self.bx - self.ax) / (self.mx - 1)

    @property
    def hy(self) -> float:
        return (self.by - self.ay) / (self.my - 1)

    @property
    def n_knots(self) -> int:
        return self.mx * self.my

    @property
    def shape(self) -> tuple[int, int]:
        return (self.mx, self.my)

    @property
    def x(self) -> np.ndarray:
        x = self.ax + self.hx * np.arange(self.mx)
        x[0], x[-1] = self.ax, self.bx
        return x

    @property
    def y(self) -> np.ndarray:
        y = self.ay + self.hy * np.arange(self.my)
        y[0], y[-1] = self.ay, self.by
        return y

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def coordinates(self) -> np.ndarray:
        """Knot coordinates as an ``(n_knots, 2)`` array in row-major order."""
        X, Y = self.mesh()
        return np.column_stack([X.ravel(), Y.ravel()])

    def interior(self) -> np.ndarray:
        """Flat indices of the interior knots."""
        mask = np.zeros(self.shape, dtype=bool)
        mask[1:-1, 1:-1] = True
        return np.flatnonzero(mask)

    def refine(self, factor: int = 2) -> "Grid2D":
        return Grid2D(
            self.ax, self.bx, self.ay, self.by,
            (self.mx - 1) * factor + 1, (self.my - 1) * factor + 1,
        )


Grid = Union[Grid1D, Grid2D]


@dataclass(frozen=True)
class Field:
    """Knot values of a piecewise-linear function on ``grid``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridError(
                f"field shape {values.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise GridError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)


def make_grid_1d(a: float, b: float, m: int) -> Grid1D:
    return Grid1D(float(a), float(b), m)


def make_grid_2d(ax: float, bx: float, ay: float, by: float, mx: int, my: int) -> Grid2D:
    return Grid2D(float(ax), float(bx), float(ay), float(by), mx, my)


def weierstrass_truncated(x, a: float = 0.4, b: float = 4.0, K: int = 10):
    """Partial sum ``sum_{n=0}^{K} a**n * cos(b**n * pi * x)``."""
    if not 0 < a < 1:
        raise ValueError(f"amplitude ratio must lie in (0, 1), got {a}")
    if K < 0:
        raise ValueError(f"truncation index must be >= 0, got {K}")
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for n in range(int(K) + 1):
        total = total + a**n * np.cos(b**n * np.pi * x)
    return total if total.ndim else float(total)


# Domains of the benchmark problems; ids 5 and 6 are square 2D domains.
EXAMPLE_DOMAINS = {
    0: (0.0, 1.0),
    1: (0.0, 1.0),
    2: (0.0, 1.0),
    3: (0.0, 2.5),
    4: (0.0, 1.0),
    5: (0.0, 1.0),
    6: (0.0, 2.0),
}


def example_dim(example_id: int) -> int:
    if example_id not in EXAMPLE_DOMAINS:
        raise ValueError(f"unknown example id {example_id}; expected 0..6")
    return 2 if example_id >= 5 else 1


def default_grid(example_id: int, m: int | None = None) -> Grid:
    """Default grid for a benchmark: ``m = 100`` intervals in 1D, 64x64 knots in 2D."""
    dim = example_dim(example_id)
    lo, hi = EXAMPLE_DOMAINS[example_id]
    if dim == 1:
        return make_grid_1d(lo, hi, 100 if m is None else m)
    n = 64 if m is None else m
    return make_grid_2d(lo, hi, lo, hi, n, n)


def _piecewise(x, pieces, default=None):
    # first matching half-open interval wins
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.nan if default is None else default)
    taken = np.zeros(x.shape, dtype=bool)
    for value, inside in pieces:
        mask = inside(x) & ~taken
        out[mask] = value
        taken |= mask
    return out


def _target_1d(example_id: int, x: np.ndarray) -> np.ndarray:
    if example_id == 0:
        return 1.0 + x * (1.0 - x) * np.sin(4.0 * np.pi * x)
    if example_id == 1:
        return _piecewise(x, [(1.5, lambda t: (t >= 1 / 3) & (t < 2 / 3))], default=0.5)
    if example_id == 2:
        return _piecewise(x, [
            (0.5, lambda t: (t >= 0) & (t < 0.3)),
            (1.0, lambda t: (t >= 0.3) & (t < 0.7)),
            (1.5, lambda t: (t >= 0.7) & (t <= 1)),
        ])
    if example_id == 3:
        return _piecewise(x, [
            (0.5, lambda t: (t >= 0) & (t < 0.5)),
            (1.0, lambda t: (t >= 0.5) & (t < 1.0)),
            (0.5, lambda t: (t >= 1.0) & (t <= 1.5)),
            (1.5, lambda t: (t >= 1.5) & (t < 2.0)),
            (0.5, lambda t: (t >= 2.0) & (t <= 2.5)),
        ])
    if example_id == 4:
        return 2.0 / np.pi * np.arctan(weierstrass_truncated(x, 0.4, 4.0, 10)) + 1.0
    raise ValueError(f"example {example_id} is not one-dimensional")


def _target_2d(example_id: int, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    if example_id == 5:
        disk = (X - 0.5) ** 2 + (Y - 0.5) ** 2 <= 0.25**2
        return np.where(disk, 1.5, 0.5)
    if example_id == 6:
        out = np.full(X.shape, 0.5)
        second = (X - 1.4) ** 2 + (Y - 1.4) ** 2 <= 0.3**2
        first = (X - 0.6) ** 2 + (Y - 0.6) ** 2 <= 0.3**2
        out[second] = 1.5
        out[first] = 1.0
        return out
    raise ValueError(f"example {example_id} is not two-dimensional")


def target_function(example_id: int):
    """Closed-form target as a callable of coordinates (``f(x)`` or ``f(x, y)``)."""
    if example_dim(example_id) == 1:
        return lambda x: _target_1d(example_id, np.asarray(x, dtype=float))
    return lambda x, y: _target_2d(
        example_id, np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    )


def target_example(example_id: int, grid: Grid) -> Field:
    """Exact benchmark coefficient sampled at the knots of ``grid``."""
    dim = example_dim(example_id)
    if dim != grid.ndim:
        raise GridError(
            f"example {example_id} is {dim}D but the grid is {grid.ndim}D"
        )
    if dim == 1:
        values = _target_1d(example_id, grid.knots)
    else:
        values = _target_2d(example_id, *grid.mesh())
    return Field(grid, values)
