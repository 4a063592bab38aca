"""Split-step Fourier propagation of the single-particle Schrodinger equation.

The propagator is the symmetric Strang product
``exp(-iV dt/2hbar) exp(-iT dt/hbar) exp(-iV dt/2hbar)`` with the kinetic
factor applied exactly in Fourier space.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import ConfigError
from .grid import FFT_WORKERS, ComplexField, Grid, RealField, inner_product

log = logging.getLogger(__name__)

__all__ = [
    "Units",
    "PotentialSpec",
    "InitialStateSpec",
    "Potential",
    "Timeline",
    "Propagator",
    "build_potential",
    "build_initial_state",
    "split_step",
    "evolve",
    "energy",
    "stability_limit",
    "stationary_filter",
]

POTENTIAL_KINDS = ("free", "harmonic", "hard_barrier")
STATE_KINDS = ("gaussian", "plane_wave", "two_gaussian_slits", "harmonic_ground", "harmonic_coherent", "vortex")


@dataclass(frozen=True)
class Units:
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.mass > 0):
            raise ConfigError("hbar and mass must be positive")


@dataclass(frozen=True)
class PotentialSpec:
    """Parameters of an external potential.

    ``hard_barrier`` is a slab normal to axis 0 of the given ``thickness``
    centred at ``position``; each aperture ``(center, width)`` opens a strip
    along axis 1 (2D only).
    """

    kind: str = "free"
    omega: float = 1.0
    center: tuple[float, ...] = ()
    position: float = 0.0
    thickness: float = 0.5
    height: float = 100.0
    apertures: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class InitialStateSpec:
    """Parameters of the initial wavefunction.

    Only the fields relevant to ``kind`` are read. For ``two_gaussian_slits``
    the slits are separated along axis 1 and the packet moves along axis 0
    with wavenumber ``momentum[0]`` from ``center[0]``.
    """

    kind: str = "gaussian"
    center: tuple[float, ...] = ()
    width: tuple[float, ...] = (1.0,)
    momentum: tuple[float, ...] = ()
    separation: float = 4.0
    slit_width: float = 0.5
    longitudinal_width: float | None = None
    phase: float = 0.0
    omega: float = 1.0
    displacement: tuple[float, ...] = ()
    winding: int = 1
    refine: bool = False  # project onto the discrete propagator's eigenstate (see stationary_filter)


@dataclass(frozen=True, eq=False)
class Potential:
    kind: str
    field: RealField
    spec: PotentialSpec

    @property
    def values(self) -> np.ndarray:
        return self.field.values


def _per_dim(values, dims, default, name):
    values = tuple(values) if values else ()
    if not values:
        return (default,) * dims
    if len(values) == 1 and dims > 1:
        return values * dims
    if len(values) != dims:
        raise ConfigError(f"{name} needs {dims} entries, got {len(values)}")
    return tuple(float(v) for v in values)


def build_potential(spec: PotentialSpec, grid: Grid, units: Units = Units()) -> Potential:
    if spec.kind not in POTENTIAL_KINDS:
        raise ConfigError(f"unknown potential kind {spec.kind!r}; expected one of {POTENTIAL_KINDS}")
    mesh = grid.mesh
    if spec.kind == "free":
        values = np.zeros(grid.shape)
    elif spec.kind == "harmonic":
        if spec.omega <= 0:
            raise ConfigError("harmonic omega must be positive")
        center = _per_dim(spec.center, grid.dims, 0.0, "potential.center")
        r2 = sum((x - c) ** 2 for x, c in zip(mesh, center))
        values = 0.5 * units.mass * spec.omega**2 * r2
    else:
        if spec.height <= 0:
            raise ConfigError("hard_barrier height must be positive")
        if spec.thickness <= 0:
            raise ConfigError("hard_barrier thickness must be positive")
        inside = np.abs(mesh[0] - spec.position) <= 0.5 * spec.thickness
        if spec.apertures:
            if grid.dims != 2:
                raise ConfigError("apertures require a 2D grid")
            for center, width in spec.apertures:
                if width <= 0:
                    raise ConfigError("aperture width must be positive")
                inside &= ~(np.abs(mesh[1] - center) < 0.5 * width)
        values = np.where(inside, spec.height, 0.0)
    return Potential(spec.kind, RealField(grid, values), spec)


def _normalized(grid: Grid, psi: np.ndarray) -> ComplexField:
    nrm = math.sqrt(float(np.vdot(psi, psi).real) * grid.cell_volume)
    return ComplexField(grid, psi / nrm)


def _gaussian(x, center, sigma):
    return np.exp(-((x - center) ** 2) / (4.0 * sigma**2))


def build_initial_state(spec: InitialStateSpec, grid: Grid, units: Units = Units()) -> ComplexField:
    """Realize a normalized initial wavefunction on the grid."""
    if spec.kind not in STATE_KINDS:
        raise ConfigError(f"unknown initial state kind {spec.kind!r}; expected one of {STATE_KINDS}")
    mesh = grid.mesh
    dims = grid.dims
    hbar, m = units.hbar, units.mass

    if spec.kind == "gaussian":
        center = _per_dim(spec.center, dims, 0.0, "initial.center")
        width = _per_dim(spec.width, dims, 1.0, "initial.width")
        k0 = _per_dim(spec.momentum, dims, 0.0, "initial.momentum")
        if min(width) <= 0:
            raise ConfigError("gaussian width must be positive")
        psi = np.ones(grid.shape, dtype=complex)
        for x, c, s, k in zip(mesh, center, width, k0):
            psi = psi * _gaussian(x, c, s) * np.exp(1j * k * x)
        return _normalized(grid, psi)

    if spec.kind == "plane_wave":
        k0 = _per_dim(spec.momentum, dims, 0.0, "initial.momentum")
        for k, length in zip(k0, grid.extents):
            n = k * length / (2 * np.pi)
            if abs(n - round(n)) > 1e-9:
                raise ConfigError(f"plane_wave momentum {k} is not on the wavenumber grid (2*pi*n/{length})")
        phase = sum(k * x for k, x in zip(k0, mesh))
        return _normalized(grid, np.exp(1j * phase))

    if spec.kind == "two_gaussian_slits":
        if dims != 2:
            raise ConfigError("two_gaussian_slits requires a 2D grid")
        d, sigma = spec.separation, spec.slit_width
        if d <= 0:
            raise ConfigError("slit separation must be positive")
        if sigma <= 0:
            raise ConfigError("slit width must be positive")
        sigma_l = spec.longitudinal_width if spec.longitudinal_width is not None else sigma
        if sigma_l <= 0:
            raise ConfigError("longitudinal width must be positive")
        center = _per_dim(spec.center, dims, 0.0, "initial.center")
        k0 = _per_dim(spec.momentum, dims, 0.0, "initial.momentum")
        x, y = mesh
        yc = center[1]
        transverse = _gaussian(y, yc + 0.5 * d, sigma) + np.exp(1j * spec.phase) * _gaussian(y, yc - 0.5 * d, sigma)
        psi = _gaussian(x, center[0], sigma_l) * transverse * np.exp(1j * (k0[0] * x + k0[1] * y))
        return _normalized(grid, psi)

    if spec.kind in ("harmonic_ground", "harmonic_coherent"):
        if spec.omega <= 0:
            raise ConfigError("omega must be positive")
        center = _per_dim(spec.center, dims, 0.0, "initial.center")
        shift = _per_dim(spec.displacement, dims, 0.0, "initial.displacement")
        if spec.kind == "harmonic_ground":
            shift = (0.0,) * dims
        a = m * spec.omega / hbar
        psi = np.ones(grid.shape, dtype=complex)
        for x, c, s in zip(mesh, center, shift):
            psi = psi * np.exp(-0.5 * a * (x - c - s) ** 2)
        return _normalized(grid, psi)

    # vortex
    if dims != 2:
        raise ConfigError("vortex requires a 2D grid")
    if spec.winding == 0:
        raise ConfigError("vortex winding must be nonzero")
    center = _per_dim(spec.center, dims, 0.0, "initial.center")
    sigma = _per_dim(spec.width, dims, 1.0, "initial.width")[0]
    if sigma <= 0:
        raise ConfigError("vortex width must be positive")
    z = (mesh[0] - center[0]) + 1j * (mesh[1] - center[1])
    if spec.winding < 0:
        z = np.conj(z)
    r2 = np.abs(z) ** 2
    psi = z ** abs(spec.winding) * np.exp(-r2 / (4 * sigma**2))
    return _normalized(grid, psi)


def stability_limit(grid: Grid, units: Units = Units()) -> float:
    """Largest dt keeping the kinetic phase per step below pi at Nyquist (with a 0.5 safety factor)."""
    dx = min(grid.spacing)
    return 0.5 * units.mass * dx * dx / (math.pi * units.hbar)


class Propagator:
    """Precomputed Strang split-step factors for a fixed potential and dt."""

    def __init__(self, potential: Potential, dt: float, units: Units = Units()):
        if not dt > 0:
            raise ConfigError("dt must be positive")
        grid = potential.field.grid
        self.grid = grid
        self.dt = float(dt)
        self.units = units
        self.half_potential = np.exp(-0.5j * potential.values * dt / units.hbar)
        self.kinetic = np.exp(-0.5j * units.hbar * grid.k_squared * dt / units.mass)

    def _kinetic(self, psi: np.ndarray) -> np.ndarray:
        return sfft.ifftn(self.kinetic * sfft.fftn(psi, workers=FFT_WORKERS), workers=FFT_WORKERS)

    def step(self, psi: np.ndarray) -> np.ndarray:
        psi = self.half_potential * psi
        psi = self._kinetic(psi)
        return self.half_potential * psi

    def steps(self, psi: np.ndarray, n: int) -> np.ndarray:
        """Apply ``n`` steps, fusing the adjacent half potential kicks."""
        if n <= 0:
            return psi
        full = self.half_potential * self.half_potential
        psi = self.half_potential * psi
        for i in range(n):
            psi = self._kinetic(psi)
            psi = (self.half_potential if i == n - 1 else full) * psi
        return psi


def split_step(psi: ComplexField, potential: Potential, dt: float, units: Units = Units()) -> ComplexField:
    return ComplexField(psi.grid, Propagator(potential, dt, units).step(psi.values), psi.time + dt)


@dataclass(eq=False)
class Timeline:
    """Wavefunction snapshots at uniformly spaced times."""

    grid: Grid
    times: np.ndarray
    psi: np.ndarray  # shape (n_snapshots, *grid.shape)
    dt: float
    steps_per_snapshot: int
    potential: Potential
    units: Units = field(default_factory=Units)
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    def snapshot(self, i: int) -> ComplexField:
        return ComplexField(self.grid, self.psi[i], float(self.times[i]))

    @property
    def snapshot_interval(self) -> float:
        return self.steps_per_snapshot * self.dt

    def norms(self) -> np.ndarray:
        axes = tuple(range(1, self.psi.ndim))
        return np.sqrt(np.sum(np.abs(self.psi) ** 2, axis=axes) * self.grid.cell_volume)

    def window(self, center: int, half_width: int = 1) -> "Timeline":
        sl = slice(center - half_width, center + half_width + 1)
        return Timeline(self.grid, self.times[sl], self.psi[sl], self.dt, self.steps_per_snapshot,
                        self.potential, self.units, list(self.warnings))


def evolve(psi0: ComplexField, potential: Potential, total_time: float, dt: float,
           snapshot_stride: int = 1, units: Units = Units()) -> Timeline:
    """Propagate ``psi0`` to ``total_time`` recording every ``snapshot_stride`` steps."""
    if dt <= 0:
        raise ConfigError("dt must be positive")
    if total_time < 0:
        raise ConfigError("total_time must be non-negative")
    if snapshot_stride < 1:
        raise ConfigError("snapshot_stride must be >= 1")
    n_steps = int(round(total_time / dt))
    if abs(n_steps * dt - total_time) > 1e-9 * max(1.0, abs(total_time)):
        raise ConfigError(f"total_time {total_time} is not an integer multiple of dt {dt}")
    if n_steps % snapshot_stride:
        raise ConfigError(f"step count {n_steps} is not a multiple of snapshot_stride {snapshot_stride}")
    grid = psi0.grid
    warnings_out = []
    limit = stability_limit(grid, units)
    if dt > limit:
        msg = f"dt={dt:g} exceeds the accuracy advisory dt <= {limit:.4g} (0.5 m dx^2 / (pi hbar))"
        log.warning(msg)
        warnings_out.append(msg)

    n_snap = n_steps // snapshot_stride + 1
    out = np.empty((n_snap,) + grid.shape, dtype=complex)
    out[0] = psi0.values
    prop = Propagator(potential, dt, units)
    psi = np.array(psi0.values)
    for i in range(1, n_snap):
        psi = prop.steps(psi, snapshot_stride)
        out[i] = psi
    times = psi0.time + np.arange(n_snap) * (snapshot_stride * dt)
    return Timeline(grid, times, out, float(dt), int(snapshot_stride), potential, units, warnings_out)


def energy(psi: ComplexField, potential: Potential, units: Units = Units()) -> float:
    """Expectation value <psi|H|psi> / <psi|psi>."""
    grid = psi.grid
    spec = sfft.fftn(psi.values, workers=FFT_WORKERS)
    # Parseval with numpy's unnormalized DFT
    kinetic = float(np.sum(np.abs(spec) ** 2 * grid.k_squared)) / grid.size * grid.cell_volume
    kinetic *= units.hbar**2 / (2 * units.mass)
    pot = float(np.sum(np.abs(psi.values) ** 2 * potential.values)) * grid.cell_volume
    return (kinetic + pot) / inner_product(psi, psi).real


def stationary_filter(psi: ComplexField, potential: Potential, dt: float, averaging_time: float,
                      units: Units = Units()) -> ComplexField:
    """Project ``psi`` onto the split-step propagator eigenstate nearest its energy.

    The state is evolved for ``averaging_time`` (one period of the level
    spacing, e.g. ``2 pi / omega`` for a harmonic trap) and time-averaged
    against ``exp(iEt/hbar)``, which cancels components at other levels.
    The symmetric Strang propagator has real eigenvectors for real
    potentials, so the result is returned with its global phase removed.
    An analytic eigenstate of the continuum Hamiltonian is only stationary
    up to O(dt^2) under the discrete propagator; the filtered state is
    stationary to rounding.
    """
    n = int(round(averaging_time / dt))
    if n < 1:
        raise ConfigError("averaging_time must cover at least one step")
    prop = Propagator(potential, dt, units)
    e = energy(psi, potential, units)
    acc = np.zeros_like(psi.values)
    cur = np.array(psi.values)
    for k in range(n):
        acc += np.exp(1j * e * k * dt / units.hbar) * cur
        cur = prop.step(cur)
    peak = acc.flat[np.argmax(np.abs(acc))]
    acc *= abs(peak) / peak
    grid = psi.grid
    return ComplexField(grid, _normalized(grid, acc.real.astype(complex)).values, psi.time)
