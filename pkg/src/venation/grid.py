"""Cell-centered uniform mesh on the unit square and grid-function containers.

Values live at cell centers x_i = (i - 1/2) h, y_j = (j - 1/2) h with h = 1/n.
Arrays are indexed values[i, j] with axis 0 along x and axis 1 along y.
All operations are pure: they never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFiniteError

GRAD_MODES = ("mirror", "one_sided")


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centered mesh on [0,1]^2 with n cells per side."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise ValueError(f"grid needs an integer n >= 2, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def centers(self) -> np.ndarray:
        """1D coordinates of the cell centers, (i - 1/2) h for i = 1..n."""
        return (np.arange(self.n) + 0.5) * self.h

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) coordinate arrays with X[i, j] = x_i and Y[i, j] = y_j."""
        c = self.centers()
        return np.meshgrid(c, c, indexing="ij")

    def boundary_mask(self) -> np.ndarray:
        """Boolean mask that is True on the ring of boundary cells."""
        mask = np.zeros((self.n, self.n), dtype=bool)
        mask[0, :] = mask[-1, :] = True
        mask[:, 0] = mask[:, -1] = True
        return mask


def make_grid(n: int) -> GridSpec:
    """Build the mesh with n cells per side (n >= 2)."""
    return GridSpec(n)


def _validated(values, grid: GridSpec) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.shape != (grid.n, grid.n):
        raise ValueError(f"values shape {v.shape} does not match grid n={grid.n}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("field contains NaN or Inf values")
    return v


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Scalar grid function; value (i, j) is attached to cell center (x_i, y_j)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _validated(self.values, self.grid))


@dataclass(frozen=True, eq=False)
class VectorField2:
    """Two-component vector grid function on a shared grid."""

    c1: ScalarField
    c2: ScalarField

    def __post_init__(self):
        if self.c1.grid != self.c2.grid:
            raise ValueError("vector components must share one grid")

    @property
    def grid(self) -> GridSpec:
        return self.c1.grid


@dataclass(frozen=True, eq=False)
class SymTensorField2:
    """Symmetric 2x2 tensor grid function; only the three distinct entries are stored."""

    c11: ScalarField
    c12: ScalarField
    c22: ScalarField

    def __post_init__(self):
        if not (self.c11.grid == self.c12.grid == self.c22.grid):
            raise ValueError("tensor components must share one grid")

    @property
    def grid(self) -> GridSpec:
        return self.c11.grid


def constant_field(grid: GridSpec, value: float) -> ScalarField:
    return ScalarField(grid, np.full((grid.n, grid.n), float(value)))


def field_from_function(grid: GridSpec, fn: Callable) -> ScalarField:
    """Sample fn(X, Y) at the cell centers."""
    X, Y = grid.meshgrid()
    return ScalarField(grid, np.broadcast_to(np.asarray(fn(X, Y), dtype=float), X.shape).copy())


def vector_field(grid: GridSpec, v1, v2) -> VectorField2:
    return VectorField2(ScalarField(grid, v1), ScalarField(grid, v2))


def tensor_field(grid: GridSpec, v11, v12, v22) -> SymTensorField2:
    return SymTensorField2(ScalarField(grid, v11), ScalarField(grid, v12), ScalarField(grid, v22))


def _check_mode(mode: str):
    if mode not in GRAD_MODES:
        raise ValueError(f"unknown gradient boundary mode {mode!r}; expected one of {GRAD_MODES}")


def dx(f: ScalarField, mode: str = "mirror") -> ScalarField:
    """Central x-derivative.

    Interior cells use (f[i+1] - f[i-1]) / 2h.  At the two boundary columns the
    ghost value is closed per `mode`: "mirror" reflects the adjacent interior
    value (zero normal derivative), "one_sided" takes a first-order one-sided
    difference.
    """
    _check_mode(mode)
    v = f.values
    h = f.grid.h
    out = np.empty_like(v)
    out[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2.0 * h)
    edge = 2.0 * h if mode == "mirror" else h
    out[0, :] = (v[1, :] - v[0, :]) / edge
    out[-1, :] = (v[-1, :] - v[-2, :]) / edge
    return ScalarField(f.grid, out)


def dy(f: ScalarField, mode: str = "mirror") -> ScalarField:
    """Central y-derivative; same boundary closure as dx with i and j swapped."""
    _check_mode(mode)
    v = f.values
    h = f.grid.h
    out = np.empty_like(v)
    out[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2.0 * h)
    edge = 2.0 * h if mode == "mirror" else h
    out[:, 0] = (v[:, 1] - v[:, 0]) / edge
    out[:, -1] = (v[:, -1] - v[:, -2]) / edge
    return ScalarField(f.grid, out)


def l2_norm(f: ScalarField) -> float:
    """Midpoint-rule L2 norm, sqrt(h^2 sum f_ij^2)."""
    return float(f.grid.h * np.linalg.norm(f.values))


def rel_l2_error(a: ScalarField, b: ScalarField) -> float:
    """||a - b||_2 / ||b||_2 in the midpoint-rule grid norm."""
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    denom = np.linalg.norm(b.values)
    if denom == 0.0:
        raise ValueError("relative error undefined: ||b|| is zero")
    return float(np.linalg.norm(a.values - b.values) / denom)


def restrict(f_fine: ScalarField) -> ScalarField:
    """Coarsen by one dyadic level: each coarse value averages its 2x2 fine block."""
    n_fine = f_fine.grid.n
    if n_fine % 2 != 0:
        raise ValueError(f"cannot restrict an odd resolution n={n_fine}")
    v = f_fine.values
    coarse = 0.25 * (v[0::2, 0::2] + v[1::2, 0::2] + v[0::2, 1::2] + v[1::2, 1::2])
    return ScalarField(make_grid(n_fine // 2), coarse)
