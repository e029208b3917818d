"""
Structured grids, cell-centered fields and the finite-volume operators built on them.

All operators are pure: they read their input fields and return new ones.
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .exceptions import GridError, LocalizerExceedsBox, NegativeFieldError

logger = logging.getLogger(__name__)

BOUNDARY_CONDITIONS = ('neumann', 'dirichlet')
MIN_CELLS_PER_AXIS = 8


@dataclass(frozen=True)
class Grid:
    """Uniform Cartesian mesh on the box [-half_width, half_width]^dim."""

    dim: int
    half_width: float
    cells_per_axis: int
    boundary: str = 'neumann'

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if not np.isfinite(self.half_width) or self.half_width <= 0:
            raise GridError(f"half_width must be a positive length, got {self.half_width}")
        if int(self.cells_per_axis) != self.cells_per_axis or self.cells_per_axis < MIN_CELLS_PER_AXIS:
            raise GridError(
                f"cells_per_axis must be an integer >= {MIN_CELLS_PER_AXIS}, got {self.cells_per_axis}"
            )
        if self.boundary not in BOUNDARY_CONDITIONS:
            raise GridError(f"boundary must be one of {BOUNDARY_CONDITIONS}, got {self.boundary!r}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.cells_per_axis

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.cells_per_axis,) * self.dim

    @property
    def cell_count(self) -> int:
        return self.cells_per_axis ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    def centers(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        return -self.half_width + (np.arange(self.cells_per_axis) + 0.5) * self.dx

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Cell-center coordinates, one array of grid shape per axis."""
        axes = [self.centers()] * self.dim
        return tuple(np.meshgrid(*axes, indexing='ij'))

    def radius_squared(self) -> np.ndarray:
        return sum(x ** 2 for x in self.coordinates())

    def radius(self) -> np.ndarray:
        return np.sqrt(self.radius_squared())

    def integrate(self, values: np.ndarray) -> float:
        """Midpoint quadrature of a cell-centered array over the box."""
        return float(np.sum(values) * self.cell_volume)

    def with_cells(self, cells_per_axis: int) -> 'Grid':
        return Grid(self.dim, self.half_width, cells_per_axis, self.boundary)


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar cell-centered values on a grid. Values are copied on construction."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.size != self.grid.cell_count:
            raise GridError(
                f"field has {values.size} values but the grid has {self.grid.cell_count} cells"
            )
        object.__setattr__(self, 'values', values.reshape(self.grid.shape))

    @classmethod
    def nonnegative(cls, grid: Grid, values, name: str = 'field') -> 'Field':
        """Build a density, pressure or fraction field, rejecting negative entries."""
        field = cls(grid, values)
        if np.any(field.values < 0) or not np.all(np.isfinite(field.values)):
            raise NegativeFieldError(f"{name} must be finite and non-negative (min {field.values.min():.3e})")
        return field

    @classmethod
    def constant(cls, grid: Grid, value: float) -> 'Field':
        return cls(grid, np.full(grid.shape, float(value)))

    @property
    def flat(self) -> np.ndarray:
        """Row-major view of the values."""
        return self.values.reshape(-1)

    def integral(self) -> float:
        return self.grid.integrate(self.values)

    def max(self) -> float:
        return float(np.max(self.values))

    def min(self) -> float:
        return float(np.min(self.values))


@dataclass(frozen=True, eq=False)
class VectorField:
    """One cell-centered Field per axis."""

    grid: Grid
    components: Tuple[Field, ...]

    def __post_init__(self):
        components = tuple(self.components)
        if len(components) != self.grid.dim:
            raise GridError(f"expected {self.grid.dim} components, got {len(components)}")
        object.__setattr__(self, 'components', components)

    def __neg__(self) -> 'VectorField':
        return VectorField(self.grid, tuple(Field(self.grid, -c.values) for c in self.components))

    def magnitude_squared(self) -> np.ndarray:
        return sum(c.values ** 2 for c in self.components)

    def max_magnitude(self) -> float:
        return float(np.sqrt(np.max(self.magnitude_squared())))


def _pad(values: np.ndarray, axis: int, boundary: str) -> np.ndarray:
    """Add one ghost cell on each side of an axis."""
    width = [(0, 0)] * values.ndim
    width[axis] = (1, 1)
    if boundary == 'neumann':
        return np.pad(values, width, mode='edge')
    return np.pad(values, width, mode='constant', constant_values=0.0)


def _take(values: np.ndarray, axis: int, start, stop) -> np.ndarray:
    index = [slice(None)] * values.ndim
    index[axis] = slice(start, stop)
    return values[tuple(index)]


def gradient(f: Field) -> VectorField:
    """Centered differences inside, one-sided first order at boundary cells."""
    grid = f.grid
    components = tuple(
        Field(grid, np.gradient(f.values, grid.dx, axis=axis, edge_order=1))
        for axis in range(grid.dim)
    )
    return VectorField(grid, components)


def laplacian(f: Field) -> Field:
    """(2d+1)-point Laplacian with ghost cells set by the grid boundary condition."""
    grid = f.grid
    out = np.zeros(grid.shape)
    for axis in range(grid.dim):
        padded = _pad(f.values, axis, grid.boundary)
        out += _take(padded, axis, 2, None) - 2.0 * f.values + _take(padded, axis, None, -2)
    return Field(grid, out / grid.dx ** 2)


def face_fluxes(a: Field, b: Field, axis: int) -> np.ndarray:
    """Face values of a*db/dx along one axis with a averaged arithmetically (N+1 faces)."""
    grid = a.grid
    a_pad = _pad(a.values, axis, grid.boundary)
    b_pad = _pad(b.values, axis, grid.boundary)
    a_face = 0.5 * (_take(a_pad, axis, 1, None) + _take(a_pad, axis, None, -1))
    return a_face * np.diff(b_pad, axis=axis) / grid.dx


def div_density_flux(n: Field, p: Field) -> Field:
    """
    Conservative discretization of div[n grad p].

    Also used with (p, c) for the fraction regularization div[p grad c]. With Neumann
    boundaries the boundary faces carry zero flux, so the cell sum telescopes to zero.
    """
    grid = n.grid
    out = np.zeros(grid.shape)
    for axis in range(grid.dim):
        out += np.diff(face_fluxes(n, p, axis), axis=axis)
    return Field(grid, out / grid.dx)


def upwind_advect(c: Field, v: VectorField) -> Field:
    """
    First-order upwind value of -v . grad c.

    Backward differences where v > 0 along an axis, forward differences otherwise.
    """
    grid = c.grid
    out = np.zeros(grid.shape)
    for axis in range(grid.dim):
        padded = _pad(c.values, axis, grid.boundary)
        backward = (c.values - _take(padded, axis, None, -2)) / grid.dx
        forward = (_take(padded, axis, 2, None) - c.values) / grid.dx
        velocity = v.components[axis].values
        out -= np.where(velocity > 0, velocity * backward, velocity * forward)
    return Field(grid, out)


def interior(mask: np.ndarray, layers: int = 1) -> np.ndarray:
    """
    Cells of mask whose nearest neighbours along every axis are also in mask, applied layers times.

    Box boundaries count as inside, like the Neumann ghost cells.
    """
    inside = np.asarray(mask, dtype=bool)
    for _ in range(layers):
        eroded = inside.copy()
        for axis in range(inside.ndim):
            padded = _pad(inside, axis, 'neumann')
            eroded &= _take(padded, axis, 2, None) & _take(padded, axis, None, -2)
        inside = eroded
    return inside


def quintic_bridge(s: np.ndarray) -> np.ndarray:
    """C2 step from 1 at s=0 to 0 at s=1 with vanishing first and second derivatives at both ends."""
    s = np.clip(s, 0.0, 1.0)
    return 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)


def localizer(grid: Grid, L: float) -> Field:
    """Radial cutoff equal to 1 on the ball of radius L and 0 outside radius L + 1."""
    if L < 0 or L + 1.0 > grid.half_width * (1.0 + 1e-12):
        raise LocalizerExceedsBox(
            f"localizer radius {L} + 1 does not fit in the box of half width {grid.half_width}"
        )
    return Field(grid, quintic_bridge(grid.radius() - L))
