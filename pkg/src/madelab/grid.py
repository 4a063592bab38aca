"""Uniform periodic grids, fields and spectral operators.

Grid points sit at ``x_i = -L/2 + i*dx`` along every axis. Field arrays use
``indexing='ij'`` so axis 0 is x and axis 1 is y, stored row-major.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import ConfigError, DimensionError

__all__ = [
    "Grid",
    "Field",
    "ComplexField",
    "RealField",
    "make_grid",
    "fourier_forward",
    "fourier_inverse",
    "gradient",
    "laplacian",
    "divergence",
    "inner_product",
    "norm",
]

FFT_WORKERS = -1


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Cartesian periodic grid in one or two dimensions."""

    extents: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        if len(self.extents) != len(self.points):
            raise ConfigError("extents and points must have the same length")
        if len(self.points) not in (1, 2):
            raise ConfigError(f"dims must be 1 or 2, got {len(self.points)}")
        for n in self.points:
            if not isinstance(n, (int, np.integer)) or n < 8 or not _is_power_of_two(int(n)):
                raise ConfigError(f"points must be powers of two >= 8, got {n}")
        for length in self.extents:
            if not np.isfinite(length) or length <= 0:
                raise ConfigError(f"extents must be positive, got {length}")
        object.__setattr__(self, "extents", tuple(float(v) for v in self.extents))
        object.__setattr__(self, "points", tuple(int(v) for v in self.points))

    @property
    def dims(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(length / n for length, n in zip(self.extents, self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def lower(self) -> tuple[float, ...]:
        return tuple(-0.5 * length for length in self.extents)

    @property
    def upper(self) -> tuple[float, ...]:
        """Coordinate of the last grid point along each axis."""
        return tuple(lo + (n - 1) * d for lo, n, d in zip(self.lower, self.points, self.spacing))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(lo + d * np.arange(n) for lo, d, n in zip(self.lower, self.spacing, self.points))

    @cached_property
    def wavenumber_axes(self) -> tuple[np.ndarray, ...]:
        """Angular wavenumbers in standard FFT ordering, spanning [-pi/dx, pi/dx)."""
        return tuple(2.0 * np.pi * np.fft.fftfreq(n, d) for n, d in zip(self.points, self.spacing))

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def k_mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.wavenumber_axes, indexing="ij"))

    @cached_property
    def k_squared(self) -> np.ndarray:
        return sum(k * k for k in self.k_mesh)

    def __reduce__(self):
        return (Grid, (self.extents, self.points))


def make_grid(dims: int, extents, points) -> Grid:
    extents = tuple(np.atleast_1d(np.asarray(extents, dtype=float)).tolist())
    points = tuple(int(p) for p in np.atleast_1d(points))
    if dims not in (1, 2):
        raise ConfigError(f"dims must be 1 or 2, got {dims}")
    if len(extents) != dims or len(points) != dims:
        raise ConfigError(f"expected {dims} extents and points, got {len(extents)} and {len(points)}")
    for p in np.atleast_1d(points):
        if not _is_power_of_two(int(p)) or int(p) < 8:
            raise ConfigError(f"points must be powers of two >= 8, got {p}")
    return Grid(extents, points)


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of a scalar on a grid. The array is made read-only."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    _dtype = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if self._dtype is not None:
            values = values.astype(self._dtype, copy=False)
        if values.shape != self.grid.shape:
            if values.size != self.grid.size:
                raise DimensionError(f"field of size {values.size} does not fit grid {self.grid.shape}")
            values = values.reshape(self.grid.shape)
        if values.flags.writeable:
            values = values.copy()
            values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "time", float(self.time))

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def with_values(self, values, time=None):
        cls = ComplexField if np.iscomplexobj(values) else RealField
        return cls(self.grid, values, self.time if time is None else time)


class ComplexField(Field):
    _dtype = np.complex128


class RealField(Field):
    _dtype = np.float64


def _values(f):
    return f.values if isinstance(f, Field) else np.asarray(f)


def fourier_forward(field: Field) -> ComplexField:
    """Unnormalized forward DFT over all axes (numpy convention)."""
    return ComplexField(field.grid, sfft.fftn(field.values, workers=FFT_WORKERS), field.time)


def fourier_inverse(field: Field) -> ComplexField:
    return ComplexField(field.grid, sfft.ifftn(field.values, workers=FFT_WORKERS), field.time)


def spectral_gradient(values: np.ndarray, grid: Grid) -> list[np.ndarray]:
    """Array-level spectral gradient; real input gives real output."""
    real_input = not np.iscomplexobj(values)
    spec = sfft.fftn(values, workers=FFT_WORKERS)
    out = []
    for axis, k in enumerate(grid.k_mesh):
        kk = k.copy()
        n = grid.points[axis]
        # Nyquist mode has no well-defined odd derivative.
        nyq = [slice(None)] * grid.dims
        nyq[axis] = n // 2
        kk[tuple(nyq)] = 0.0
        d = sfft.ifftn(1j * kk * spec, workers=FFT_WORKERS)
        out.append(d.real if real_input else d)
    return out


def spectral_laplacian(values: np.ndarray, grid: Grid) -> np.ndarray:
    real_input = not np.iscomplexobj(values)
    d = sfft.ifftn(-grid.k_squared * sfft.fftn(values, workers=FFT_WORKERS), workers=FFT_WORKERS)
    return d.real if real_input else d


def gradient(field: Field) -> list[Field]:
    """Per-axis spectral derivative of a field."""
    return [field.with_values(d) for d in spectral_gradient(field.values, field.grid)]


def laplacian(field: Field) -> Field:
    return field.with_values(spectral_laplacian(field.values, field.grid))


def divergence(components) -> Field:
    """Spectral divergence of a vector field given as one field per axis."""
    grid = components[0].grid
    total = None
    for axis, comp in enumerate(components):
        d = spectral_gradient(comp.values, grid)[axis]
        total = d if total is None else total + d
    return components[0].with_values(total)


def inner_product(a: Field, b: Field) -> complex:
    """Discrete ``<a|b> = sum(conj(a) b) * dV``."""
    if a.grid != b.grid:
        raise DimensionError("inner_product requires fields on the same grid")
    return complex(np.vdot(a.values, b.values) * a.grid.cell_volume)


def norm(field: Field) -> float:
    return float(np.sqrt(inner_product(field, field).real))
