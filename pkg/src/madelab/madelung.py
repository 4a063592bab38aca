"""Hydrodynamic (Madelung) decomposition of a wavefunction.

Phase gradients are taken pointwise as ``hbar * Im(grad psi / psi)`` so no
global phase unwrapping is ever needed. Points where the density falls
below ``rho_floor * max(rho)`` form the node mask; derived quantities are NaN
there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import BranchWrapError, DegenerateStateError, InsufficientDataError, InvalidLoopError
from .grid import ComplexField, Field, RealField, spectral_gradient, spectral_laplacian
from .tdse import Timeline, Units

__all__ = [
    "DEFAULT_RHO_FLOOR",
    "MadelungFields",
    "VelocityField",
    "Node",
    "NodeSet",
    "Residual",
    "Circulation",
    "decompose",
    "quantum_potential",
    "current_density",
    "velocity_field",
    "osmotic_velocity",
    "continuity_residual",
    "hj_residual",
    "find_nodes",
    "circulation",
]

DEFAULT_RHO_FLOOR = 1e-12


def node_mask(rho: np.ndarray, rho_floor: float = DEFAULT_RHO_FLOOR) -> np.ndarray:
    return rho < rho_floor * rho.max()


@dataclass(frozen=True, eq=False)
class MadelungFields:
    psi: ComplexField
    rho: RealField
    amplitude: RealField
    grad_S: list
    v_q: RealField
    node_mask: np.ndarray
    units: Units
    rho_floor: float


@dataclass(frozen=True, eq=False)
class VelocityField:
    components: list
    node_mask: np.ndarray
    time: float = 0.0
    consistency: float = 0.0  # max |Im(grad psi/psi) hbar/m - j/rho| off-mask

    @property
    def grid(self):
        return self.components[0].grid


def _masked(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=float)
    out[mask] = np.nan
    return out


def _check_nonzero(psi: np.ndarray):
    if not np.any(psi):
        raise DegenerateStateError("wavefunction is identically zero")


def _log_derivative(psi: np.ndarray, grid, mask):
    """grad(psi)/psi per axis, with masked points set to NaN."""
    safe = np.where(mask, 1.0, psi)
    out = []
    for d in spectral_gradient(psi, grid):
        q = d / safe
        q[mask] = complex(np.nan, np.nan)
        out.append(q)
    return out


def _quantum_potential_values(amplitude: np.ndarray, grid, mask, units: Units, psi=None) -> np.ndarray:
    """``-(hbar^2/2m) lap(R)/R``.

    With ``psi`` given, ``lap(R)/R = Re(lap psi/psi) + |Im(grad psi/psi)|^2`` is
    used instead: psi is smooth where R = |psi| has kinks at near-zeros, so
    this avoids spectral ringing of lap(R) across interference minima.
    """
    c = -(units.hbar**2 / (2 * units.mass))
    if psi is None:
        safe = np.where(mask, 1.0, amplitude)
        vq = c * spectral_laplacian(amplitude, grid) / safe
    else:
        safe = np.where(mask, 1.0, psi)
        ratio = (spectral_laplacian(psi, grid) / safe).real
        for d in spectral_gradient(psi, grid):
            ratio += (d / safe).imag ** 2
        vq = c * ratio
    vq[mask] = np.nan
    return vq


def decompose(psi: ComplexField, units: Units = Units(), rho_floor: float = DEFAULT_RHO_FLOOR) -> MadelungFields:
    values = psi.values
    _check_nonzero(values)
    grid = psi.grid
    rho = np.abs(values) ** 2
    amplitude = np.abs(values)
    mask = node_mask(rho, rho_floor)
    mask.setflags(write=False)
    grad_S = [RealField(grid, units.hbar * q.imag, psi.time) for q in _log_derivative(values, grid, mask)]
    vq = _quantum_potential_values(amplitude, grid, mask, units, values)
    return MadelungFields(
        psi=psi,
        rho=RealField(grid, rho, psi.time),
        amplitude=RealField(grid, amplitude, psi.time),
        grad_S=grad_S,
        v_q=RealField(grid, vq, psi.time),
        node_mask=mask,
        units=units,
        rho_floor=rho_floor,
    )


def quantum_potential(fields: MadelungFields, method: str = "psi") -> RealField:
    """``-(hbar^2/2m) lap(R)/R`` off the node mask, NaN on it.

    ``method="amplitude"`` differentiates R directly; the default ``"psi"``
    evaluates the same quantity from derivatives of the wavefunction.
    """
    amp = fields.amplitude
    if method not in ("psi", "amplitude"):
        raise ValueError(f"unknown method {method!r}")
    psi = fields.psi.values if method == "psi" else None
    vq = _quantum_potential_values(amp.values, amp.grid, fields.node_mask, fields.units, psi)
    return RealField(amp.grid, vq, amp.time)


def current_density(psi: ComplexField, units: Units = Units()) -> list:
    """Probability current ``(hbar/m) Im(conj(psi) grad psi)`` per axis."""
    c = units.hbar / units.mass
    return [RealField(psi.grid, c * np.imag(np.conj(psi.values) * d), psi.time)
            for d in spectral_gradient(psi.values, psi.grid)]


def velocity_field(psi: ComplexField, units: Units = Units(), rho_floor: float = DEFAULT_RHO_FLOOR) -> VelocityField:
    """Guidance velocity, computed as (hbar/m) Im(grad psi/psi) and cross-checked against j/rho."""
    values = psi.values
    _check_nonzero(values)
    grid = psi.grid
    rho = np.abs(values) ** 2
    mask = node_mask(rho, rho_floor)
    mask.setflags(write=False)
    c = units.hbar / units.mass
    safe_rho = np.where(mask, 1.0, rho)
    comps, worst = [], 0.0
    for q, j in zip(_log_derivative(values, grid, mask), current_density(psi, units)):
        v = c * q.imag
        alt = j.values / safe_rho
        if not mask.all():
            worst = max(worst, float(np.max(np.abs(v - alt)[~mask])))
        comps.append(RealField(grid, v, psi.time))
    return VelocityField(comps, mask, psi.time, worst)


def osmotic_velocity(psi: ComplexField, units: Units = Units(), rho_floor: float = DEFAULT_RHO_FLOOR) -> list:
    """``(hbar/2m) grad ln rho = (hbar/m) Re(grad psi/psi)``, NaN on the node mask."""
    values = psi.values
    _check_nonzero(values)
    mask = node_mask(np.abs(values) ** 2, rho_floor)
    c = units.hbar / units.mass
    return [RealField(psi.grid, c * q.real, psi.time) for q in _log_derivative(values, psi.grid, mask)]


@dataclass(frozen=True, eq=False)
class Residual:
    field: RealField
    max_abs: float
    l2: float


def _centered_window(timeline: Timeline):
    n = len(timeline)
    if n < 3:
        raise InsufficientDataError(f"need at least 3 consecutive snapshots, got {n}")
    mid = n // 2
    return timeline.psi[mid - 1], timeline.psi[mid], timeline.psi[mid + 1], float(timeline.times[mid]), timeline.snapshot_interval


def _residual(grid, values, time, mask=None) -> Residual:
    valid = np.isfinite(values) if mask is None else ~mask
    r = values[valid]
    max_abs = float(np.max(np.abs(r))) if r.size else 0.0
    l2 = float(np.sqrt(np.sum(r * r) * grid.cell_volume))
    return Residual(RealField(grid, values, time), max_abs, l2)


def continuity_residual(timeline: Timeline) -> Residual:
    """``d(rho)/dt + div(rho v)`` at the middle snapshot of the window.

    The time derivative is a centered difference over neighbouring snapshots,
    so the residual is second order in the snapshot interval.
    """
    before, mid, after, t, h = _centered_window(timeline)
    grid = timeline.grid
    units = timeline.units
    drho = (np.abs(after) ** 2 - np.abs(before) ** 2) / (2 * h)
    c = units.hbar / units.mass
    flux_div = np.zeros(grid.shape)
    for axis, d in enumerate(spectral_gradient(mid, grid)):
        j = c * np.imag(np.conj(mid) * d)
        flux_div += spectral_gradient(j, grid)[axis]
    return _residual(grid, drho + flux_div, t)


def hj_residual(timeline: Timeline, rho_floor: float = DEFAULT_RHO_FLOOR) -> Residual:
    """``dS/dt + |grad S|^2/2m + V + V_q`` off the node mask at the middle snapshot.

    ``dS/dt`` comes from the principal argument of ``psi(t+h)/psi(t-h)``, which
    is only meaningful while the phase advances by less than pi per snapshot.
    """
    before, mid, after, t, h = _centered_window(timeline)
    grid = timeline.grid
    units = timeline.units
    psi_mid = ComplexField(grid, mid, t)
    fields = decompose(psi_mid, units, rho_floor)
    mask = fields.node_mask | node_mask(np.abs(before) ** 2, rho_floor) | node_mask(np.abs(after) ** 2, rho_floor)

    full = np.angle(after * np.conj(before))
    first = np.angle(mid * np.conj(before))
    second = np.angle(after * np.conj(mid))
    wrapped = np.abs(first + second - full) > math.pi
    if np.any(wrapped & ~mask):
        raise BranchWrapError("phase advanced by pi or more between snapshots; reduce dt or snapshot stride")

    dS_dt = units.hbar * full / (2 * h)
    kinetic = sum(g.values ** 2 for g in fields.grad_S) / (2 * units.mass)
    values = dS_dt + kinetic + timeline.potential.values + fields.v_q.values
    values = np.where(mask, np.nan, values)
    return _residual(grid, values, t, mask)


@dataclass(frozen=True)
class Node:
    position: tuple[float, float]
    winding: int


@dataclass(frozen=True)
class NodeSet:
    nodes: tuple[Node, ...] = ()

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    @property
    def total_winding(self) -> int:
        return sum(n.winding for n in self.nodes)


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def _bilinear_zero(c00, c10, c01, c11):
    """Root of the bilinear interpolant of corner values on the unit square (Newton)."""
    s, t = 0.5, 0.5
    for _ in range(30):
        f = c00 * (1 - s) * (1 - t) + c10 * s * (1 - t) + c01 * (1 - s) * t + c11 * s * t
        fs = (c10 - c00) * (1 - t) + (c11 - c01) * t
        ft = (c01 - c00) * (1 - s) + (c11 - c10) * s
        jac = np.array([[fs.real, ft.real], [fs.imag, ft.imag]])
        try:
            ds, dt = np.linalg.solve(jac, [-f.real, -f.imag])
        except np.linalg.LinAlgError:
            break
        s, t = s + ds, t + dt
        if abs(ds) + abs(dt) < 1e-14:
            break
    if not (np.isfinite(s) and np.isfinite(t)):
        return 0.5, 0.5
    return float(np.clip(s, 0.0, 1.0)), float(np.clip(t, 0.0, 1.0))


def find_nodes(psi: ComplexField, rho_floor: float = DEFAULT_RHO_FLOOR) -> NodeSet:
    """Locate phase singularities of a 2D wavefunction with their winding numbers.

    A cell is a candidate when both Re(psi) and Im(psi) change sign across
    its corners; its winding is the sum of principal phase increments around
    the cell divided by 2 pi. Zeros sitting exactly on grid points are
    handled with the ring of eight neighbouring points instead.
    """
    grid = psi.grid
    if grid.dims != 2:
        raise InvalidLoopError("find_nodes requires a 2D grid")
    v = psi.values
    _check_nonzero(v)
    x, y = grid.axes
    dx, dy = grid.spacing
    rho = np.abs(v) ** 2
    exact = v == 0

    c00, c10, c01, c11 = v[:-1, :-1], v[1:, :-1], v[:-1, 1:], v[1:, 1:]
    corners = np.stack([c00, c10, c11, c01])
    re_change = (corners.real.min(axis=0) <= 0) & (corners.real.max(axis=0) >= 0)
    im_change = (corners.imag.min(axis=0) <= 0) & (corners.imag.max(axis=0) >= 0)
    ph = np.angle(corners)
    winding = np.rint((_wrap(ph[1] - ph[0]) + _wrap(ph[2] - ph[1]) + _wrap(ph[3] - ph[2]) + _wrap(ph[0] - ph[3]))
                      / (2 * np.pi)).astype(int)
    touches_zero = exact[:-1, :-1] | exact[1:, :-1] | exact[:-1, 1:] | exact[1:, 1:]
    candidates = re_change & im_change & (winding != 0) & ~touches_zero

    nodes = []
    for i, j in zip(*np.nonzero(candidates)):
        s, t = _bilinear_zero(c00[i, j], c10[i, j], c01[i, j], c11[i, j])
        nodes.append(Node((float(x[i] + s * dx), float(y[j] + t * dy)), int(winding[i, j])))

    ring = [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)]
    for i, j in zip(*np.nonzero(exact)):
        if not (0 < i < v.shape[0] - 1 and 0 < j < v.shape[1] - 1):
            continue
        vals = [v[i + a, j + b] for a, b in ring]
        if any(val == 0 for val in vals):
            continue
        phases = np.angle(vals)
        n = int(np.rint(np.sum(_wrap(np.diff(np.append(phases, phases[0])))) / (2 * np.pi)))
        if n:
            nodes.append(Node((float(x[i]), float(y[j])), n))
    nodes.sort(key=lambda nd: nd.position)
    return NodeSet(tuple(nodes))


@dataclass(frozen=True)
class Circulation:
    value: float
    winding_estimate: float
    deviation: float  # |n_hat - round(n_hat)|


def _loop_indices(axis: np.ndarray, lo: float, hi: float, name: str):
    i0 = int(np.argmin(np.abs(axis - lo)))
    i1 = int(np.argmin(np.abs(axis - hi)))
    if not (axis[0] - 1e-12 <= lo < hi <= axis[-1] + 1e-12) or i1 - i0 < 2:
        raise InvalidLoopError(f"loop {name}-range [{lo}, {hi}] must lie inside the grid and span at least 2 cells")
    return i0, i1


def circulation(vfield: VelocityField, loop, units: Units = Units()) -> Circulation:
    """Counter-clockwise line integral of ``v`` around a rectangular loop.

    ``loop`` is ``(x_lo, x_hi, y_lo, y_hi)``; corners snap to the nearest grid
    points. Each side is integrated with Simpson's rule. The velocity near a
    node falls off like 1/r, so sides should stay several cells (about 8 for
    1e-6 accuracy) away from any node.
    """
    grid = vfield.grid
    if grid.dims != 2:
        raise InvalidLoopError("circulation requires a 2D velocity field")
    x_lo, x_hi, y_lo, y_hi = loop
    x, y = grid.axes
    i0, i1 = _loop_indices(x, x_lo, x_hi, "x")
    j0, j1 = _loop_indices(y, y_lo, y_hi, "y")
    vx, vy = (c.values for c in vfield.components)
    sides = [
        (vx[i0:i1 + 1, j0], x[i0:i1 + 1]),
        (vy[i1, j0:j1 + 1], y[j0:j1 + 1]),
        (-vx[i0:i1 + 1, j1], x[i0:i1 + 1]),
        (-vy[i0, j0:j1 + 1], y[j0:j1 + 1]),
    ]
    on_loop = np.concatenate([vfield.node_mask[i0:i1 + 1, j0], vfield.node_mask[i1, j0:j1 + 1],
                              vfield.node_mask[i0:i1 + 1, j1], vfield.node_mask[i0, j0:j1 + 1]])
    if on_loop.any() or not all(np.all(np.isfinite(f)) for f, _ in sides):
        raise InvalidLoopError("loop intersects the node mask")
    total = float(sum(simpson(f, x=s) for f, s in sides))
    n_hat = total * units.mass / (2 * np.pi * units.hbar)
    return Circulation(total, n_hat, abs(n_hat - round(n_hat)))
