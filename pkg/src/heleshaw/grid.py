"""Uniform periodic grid, cell-centered fields, and discrete integrals/norms.

The computational domain is the periodic box [0, L) x [0, L) split into
N x N square cells.  A scalar field stores one value per cell, attached to
the cell center ((i + 1/2) h, (j + 1/2) h) with h = L / N; index axis 0 is
x and axis 1 is y throughout the package.  Everything downstream (stencil
operators, the time stepper, the diagnostics) is built on the three
quadrature primitives defined here: `integrate`, `lp_norm` and
`spacetime_l2`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid2D:
    """N x N periodic grid on the square box [0, L)^2.

    The spacing ``h`` is always derived as L / N and never stored
    independently.  Grids below 8 cells per axis are rejected: the
    centered stencils degenerate there.
    """

    n_cells: int
    length: float

    def __post_init__(self):
        if self.n_cells < 8:
            raise ValueError(f"grid needs at least 8 cells per axis, got {self.n_cells}")
        if not (self.length > 0.0 and math.isfinite(self.length)):
            raise ValueError(f"box side must be a positive finite real, got {self.length}")

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    def cell_centers_1d(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.h

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays (x, y) of cell-center coordinates, indexed [i, j]."""
        x1 = self.cell_centers_1d()
        return np.meshgrid(x1, x1, indexing="ij")

    def center_distance_sq(self) -> np.ndarray:
        """Squared minimal-image distance of every cell center to the box center."""
        x, y = self.cell_centers()
        half = 0.5 * self.length
        dx = np.abs(x - half)
        dy = np.abs(y - half)
        dx = np.minimum(dx, self.length - dx)
        dy = np.minimum(dy, self.length - dy)
        return dx * dx + dy * dy


def _check_values(grid: Grid2D, values: np.ndarray, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    shape = (grid.n_cells, grid.n_cells)
    if values.shape != shape:
        raise ValueError(f"{what} must have shape {shape}, got {values.shape}")
    return values


@dataclass
class ScalarField:
    """Cell-centered scalar values over a Grid2D."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values, "scalar field")

    @classmethod
    def zeros(cls, grid: Grid2D) -> "ScalarField":
        return cls(grid, np.zeros((grid.n_cells, grid.n_cells)))

    @classmethod
    def full(cls, grid: Grid2D, value: float) -> "ScalarField":
        return cls(grid, np.full((grid.n_cells, grid.n_cells), float(value)))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.values).all())


@dataclass
class VectorField:
    """Collocated cell-centered vector values (x and y components) over a Grid2D."""

    grid: Grid2D
    x_values: np.ndarray
    y_values: np.ndarray

    def __post_init__(self):
        self.x_values = _check_values(self.grid, self.x_values, "vector x component")
        self.y_values = _check_values(self.grid, self.y_values, "vector y component")

    @classmethod
    def zeros(cls, grid: Grid2D) -> "VectorField":
        shape = (grid.n_cells, grid.n_cells)
        return cls(grid, np.zeros(shape), np.zeros(shape))

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.x_values.copy(), self.y_values.copy())

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.x_values).all() and np.isfinite(self.y_values).all())

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.x_values, self.y_values)


def integrate(f: ScalarField) -> float:
    """Discrete integral over the box: h^2 times the sum of all cell values."""
    h = f.grid.h
    return h * h * float(np.sum(f.values))


def lp_norm(f: ScalarField, p: float) -> float:
    """Discrete L^p norm, (h^2 sum |f|^p)^(1/p); p = inf gives the cell max of |f|."""
    if p == np.inf or p == math.inf:
        return float(np.max(np.abs(f.values)))
    if p < 1:
        raise ValueError(f"lp_norm requires p >= 1 or p = inf, got {p}")
    h = f.grid.h
    s = float(np.sum(np.abs(f.values) ** p))
    return (h * h * s) ** (1.0 / p)


def spacetime_l2(series: list[tuple[float, ScalarField]], dt: float) -> float:
    """Space-time L^2 norm of a uniformly sampled field series.

    Uses the left-endpoint rule: each slice is weighted by the full dt,
    (sum_k dt * ||f_k||_2^2)^(1/2).  The sample times must be uniformly
    spaced by dt.
    """
    if not series:
        raise ValueError("spacetime_l2 needs a nonempty series")
    if dt <= 0:
        raise ValueError("spacetime_l2 needs dt > 0")
    times = [t for t, _ in series]
    for a, b in zip(times, times[1:]):
        if abs((b - a) - dt) > 1e-9 * max(dt, 1.0):
            raise ValueError("spacetime_l2 series is not uniformly spaced by dt")
    total = 0.0
    for _, f in series:
        total += dt * lp_norm(f, 2) ** 2
    return math.sqrt(total)
