"""Transverse grid, two-component spinor fields, and pointwise SU(2) maps.

Semantics: each grid cell carries an independent unit spinor (one
plane-wave ray through that point).  The transverse coherence length of
the beam is far below the cell pitch, so amplitudes never interfere
between cells; everything downstream sums intensities, not amplitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, NormalizationError, ShapeError

MAX_CELLS_PER_AXIS = 8192
ALGEBRA_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Centered 2D transverse grid.

    Cell (i, j) sits at x = (i - nx/2 + 1/2) * dx, y = (j - ny/2 + 1/2) * dy,
    so the beam axis is at the grid center.  Arrays indexed [j, i] (row = y).
    """

    nx: int
    ny: int
    dx: float
    dy: float

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ConfigurationError(f"grid needs at least 2x2 cells, got {self.nx}x{self.ny}")
        if self.dx <= 0 or self.dy <= 0:
            raise ConfigurationError(f"grid pitch must be positive, got dx={self.dx}, dy={self.dy}")
        if self.nx > MAX_CELLS_PER_AXIS or self.ny > MAX_CELLS_PER_AXIS:
            raise ConfigurationError(
                f"grid exceeds {MAX_CELLS_PER_AXIS} cells per axis ({self.nx}x{self.ny})"
            )

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def cell_area(self):
        return self.dx * self.dy

    def x_coords(self):
        return (np.arange(self.nx) - self.nx / 2 + 0.5) * self.dx

    def y_coords(self):
        return (np.arange(self.ny) - self.ny / 2 + 0.5) * self.dy

    def mesh(self):
        """(X, Y) coordinate arrays of shape (ny, nx), in mm."""
        return np.meshgrid(self.x_coords(), self.y_coords())

    def index_to_coord(self, i, j):
        return ((i - self.nx / 2 + 0.5) * self.dx, (j - self.ny / 2 + 0.5) * self.dy)

    def coord_to_index(self, x, y):
        i = int(round(x / self.dx + self.nx / 2 - 0.5))
        j = int(round(y / self.dy + self.ny / 2 - 0.5))
        return (i, j)


def make_grid(extent_x_mm, extent_y_mm, pitch_mm):
    """Build a centered grid covering the given extents at the given pitch."""
    if extent_x_mm <= 0 or extent_y_mm <= 0 or pitch_mm <= 0:
        raise ConfigurationError("grid extents and pitch must be positive")
    nx = int(round(extent_x_mm / pitch_mm))
    ny = int(round(extent_y_mm / pitch_mm))
    return Grid(nx=nx, ny=ny, dx=pitch_mm, dy=pitch_mm)


@dataclass(frozen=True)
class Spinor:
    """Single two-component spinor in the z basis."""

    up: complex
    down: complex

    @property
    def norm_sq(self):
        return abs(self.up) ** 2 + abs(self.down) ** 2

    def normalized(self):
        n = np.sqrt(self.norm_sq)
        if n == 0:
            raise NormalizationError("cannot normalize the zero spinor")
        return Spinor(self.up / n, self.down / n)


SPIN_UP = Spinor(1.0 + 0.0j, 0.0 + 0.0j)
SPIN_DOWN = Spinor(0.0 + 0.0j, 1.0 + 0.0j)


def spinor_along(direction: Sequence[float]) -> Spinor:
    """Spin-up eigenstate along a unit 3-vector direction."""
    nx, ny, nz = direction
    norm = np.sqrt(nx * nx + ny * ny + nz * nz)
    if not np.isclose(norm, 1.0, atol=1e-9):
        raise NormalizationError(f"direction must be a unit vector, |n| = {norm}")
    theta = np.arccos(np.clip(nz, -1.0, 1.0))
    phi = np.arctan2(ny, nx)
    return Spinor(np.cos(theta / 2) + 0.0j, np.exp(1j * phi) * np.sin(theta / 2))


PER_CELL = "per-cell"
GLOBAL = "global"


@dataclass(frozen=True)
class SpinorField:
    """Two-component complex amplitudes on a grid.

    up/down have shape (ny, nx).  normalization is "per-cell" (every cell a
    unit spinor, the default ray semantics) or "global" (integral of the
    total density is 1).
    """

    grid: Grid
    up: np.ndarray = field(repr=False)
    down: np.ndarray = field(repr=False)
    normalization: str = PER_CELL

    def __post_init__(self):
        if self.up.shape != self.grid.shape or self.down.shape != self.grid.shape:
            raise ShapeError(
                f"amplitude shape {self.up.shape}/{self.down.shape} does not match grid {self.grid.shape}"
            )

    def cell_norms(self):
        return np.abs(self.up) ** 2 + np.abs(self.down) ** 2

    def component(self, which):
        if which == "up":
            return self.up
        if which == "down":
            return self.down
        raise ConfigurationError(f"unknown spinor component {which!r}")

    def globally_normalized(self):
        total = self.cell_norms().sum() * self.grid.cell_area
        scale = 1.0 / np.sqrt(total)
        return SpinorField(self.grid, self.up * scale, self.down * scale, GLOBAL)


def uniform_state(grid: Grid, spinor: Spinor) -> SpinorField:
    """Field with the same unit spinor in every cell."""
    if not np.isclose(spinor.norm_sq, 1.0, atol=1e-9):
        raise NormalizationError(f"spinor norm^2 = {spinor.norm_sq}, expected 1")
    shape = grid.shape
    return SpinorField(
        grid,
        np.full(shape, spinor.up, dtype=complex),
        np.full(shape, spinor.down, dtype=complex),
    )


def rotation_matrices(axis, angle):
    """SU(2) rotation exp(-i*angle/2 * axis.sigma), broadcast over angle.

    Returns an array of shape angle.shape + (2, 2).
    """
    ax, ay, az = axis
    norm = np.sqrt(ax * ax + ay * ay + az * az)
    if not np.isclose(norm, 1.0, atol=1e-9):
        raise NormalizationError(f"rotation axis must be a unit vector, |n| = {norm}")
    angle = np.asarray(angle, dtype=float)
    c = np.cos(angle / 2)
    s = np.sin(angle / 2)
    u = np.empty(angle.shape + (2, 2), dtype=complex)
    u[..., 0, 0] = c - 1j * s * az
    u[..., 0, 1] = -s * ay - 1j * s * ax
    u[..., 1, 0] = s * ay - 1j * s * ax
    u[..., 1, 1] = c + 1j * s * az
    return u


@dataclass(frozen=True)
class SU2Map:
    """Lazily evaluated per-point SU(2) rotation.

    matrix_fn maps coordinate arrays (x, y) in mm to matrices of shape
    x.shape + (2, 2).  Maps compose by pointwise matrix product.
    """

    matrix_fn: Callable = field(repr=False)

    @classmethod
    def rotation(cls, axis, angle_fn):
        """Single-axis rotation with a position-dependent angle.

        angle_fn(x, y) returns the rotation angle in rad (broadcastable);
        a plain number makes a uniform rotation.
        """
        axis = tuple(float(a) for a in axis)
        if callable(angle_fn):
            fn = angle_fn
        else:
            const = float(angle_fn)

            def fn(x, y, _c=const):
                return np.broadcast_to(_c, np.broadcast(x, y).shape)

        def matrix_fn(x, y):
            return rotation_matrices(axis, fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float)))

        return cls(matrix_fn)

    @classmethod
    def identity(cls):
        return cls.rotation((1.0, 0.0, 0.0), 0.0)

    def at(self, x, y):
        """Matrices at scattered points; shape broadcast(x, y).shape + (2, 2)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.matrix_fn(x, y)

    def on_grid(self, grid: Grid):
        xm, ym = grid.mesh()
        return self.matrix_fn(xm, ym)

    def after(self, inner: "SU2Map") -> "SU2Map":
        """Map equal to applying `inner` first, then this map (self @ inner)."""

        def matrix_fn(x, y):
            return np.matmul(self.matrix_fn(x, y), inner.matrix_fn(x, y))

        return SU2Map(matrix_fn)


def apply(su2_map: SU2Map, field_in: SpinorField) -> SpinorField:
    """Pointwise application out(x, y) = U(x, y) in(x, y)."""
    u = su2_map.on_grid(field_in.grid)
    if u.shape[:-2] != field_in.grid.shape:
        raise ShapeError(f"map evaluates to shape {u.shape[:-2]}, grid is {field_in.grid.shape}")
    up = u[..., 0, 0] * field_in.up + u[..., 0, 1] * field_in.down
    down = u[..., 1, 0] * field_in.up + u[..., 1, 1] * field_in.down
    return replace(field_in, up=up, down=down)


def inner(field_a: SpinorField, field_b: SpinorField) -> complex:
    """Discretized overlap integral <a|b> (both components, times cell area)."""
    if field_a.grid != field_b.grid:
        raise ShapeError("inner product requires a shared grid")
    s = np.vdot(field_a.up, field_b.up) + np.vdot(field_a.down, field_b.down)
    return complex(s * field_a.grid.cell_area)
