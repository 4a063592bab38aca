"""Quantitative checks on timelines and trajectory ensembles.

Covers interference fringes at a screen line, quantum-potential canyons,
streamline undulation, position/momentum dispersion and the histogram
distance between an ensemble and the density it should follow.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import ConfigError, UnreliableStatisticsError
from .grid import FFT_WORKERS, ComplexField, Grid, RealField
from .madelung import DEFAULT_RHO_FLOOR, decompose
from .tdse import Timeline
from .trajectories import (
    DEFAULT_EDGE_MARGIN,
    GuidanceFields,
    TrajectoryEnsemble,
    _integrate,
    _to_trajectory,
    interpolate,
    trusted_bounds,
)

log = logging.getLogger(__name__)

__all__ = [
    "PROFILE_FLOOR",
    "FringeProfile",
    "CanyonReport",
    "StreamlineMap",
    "DispersionReport",
    "Equivariance",
    "local_extrema",
    "fringe_profile",
    "canyon_map",
    "canyon_report",
    "streamline_map",
    "undulation",
    "dispersion_report",
    "binned_density",
    "ensemble_histogram",
    "tv_distance",
    "equivariance_distance",
]

# Extrema below this fraction of the profile maximum are ignored (rounding noise in the tails).
PROFILE_FLOOR = 1e-6


def local_extrema(values: np.ndarray, coords: np.ndarray, kind: str = "max", valid=None):
    """Interior local extrema with 3-point quadratic refinement.

    Returns refined coordinates and grid indices. Points where ``valid`` is
    False (or the value is NaN) never take part in a comparison.
    """
    v = np.asarray(values, dtype=float)
    ok = np.isfinite(v) if valid is None else (np.asarray(valid) & np.isfinite(v))
    sign = 1.0 if kind == "max" else -1.0
    s = sign * np.where(ok, v, -np.inf)
    c, left, right = s[1:-1], s[:-2], s[2:]
    hit = ok[1:-1] & ok[:-2] & ok[2:] & (c > left) & (c >= right)
    idx = np.nonzero(hit)[0] + 1
    h = coords[1] - coords[0]
    out = []
    for i in idx:
        a, b, cc = v[i - 1], v[i], v[i + 1]
        denom = a - 2 * b + cc
        shift = 0.5 * (a - cc) / denom if denom != 0 else 0.0
        out.append(coords[i] + float(np.clip(shift, -0.5, 0.5)) * h)
    return np.array(out), idx


def _envelope(rho: np.ndarray) -> np.ndarray:
    """True from the first to the last point above PROFILE_FLOOR; exact zeros inside still count."""
    above = np.nonzero(rho > PROFILE_FLOOR * rho.max())[0]
    out = np.zeros(rho.shape, dtype=bool)
    if above.size:
        out[above[0]:above[-1] + 1] = True
    return out


def _masked_runs(values: np.ndarray, coords: np.ndarray, valid: np.ndarray):
    """Centres of NaN runs inside ``valid`` with finite neighbours: nodes, where V_q diverges to -inf."""
    bad = np.isnan(values) & valid
    out, idx = [], []
    i, n = 1, len(values)
    while i < n - 1:
        if bad[i] and np.isfinite(values[i - 1]):
            j = i
            while j < n - 1 and bad[j]:
                j += 1
            if np.isfinite(values[j]) and valid[j]:
                out.append(0.5 * (coords[i] + coords[j - 1]))
                idx.append((i + j - 1) // 2)
            i = j
        else:
            i += 1
    return np.array(out), np.array(idx, dtype=int)


def _axis_index(axis: np.ndarray, value: float) -> int:
    return int(np.argmin(np.abs(axis - value)))


def _centroids(timeline: Timeline) -> np.ndarray:
    """Density centroid along axis 0 per snapshot."""
    x = timeline.grid.mesh[0]
    rho = np.abs(timeline.psi) ** 2
    axes = tuple(range(1, rho.ndim))
    return np.sum(rho * x, axis=axes) / np.sum(rho, axis=axes)


def _mean_wavenumber(psi: np.ndarray, grid: Grid, axis: int) -> float:
    spec = np.abs(sfft.fftn(psi, workers=FFT_WORKERS)) ** 2
    return float(np.sum(spec * grid.k_mesh[axis]) / np.sum(spec))


@dataclass(eq=False)
class FringeProfile:
    coords: np.ndarray
    density: np.ndarray
    maxima: np.ndarray
    minima: np.ndarray
    spacing: float
    predicted_spacing: float
    wavelength: float
    distance: float
    snapshot: int
    screen_index: int
    warnings: list = field(default_factory=list)

    @property
    def relative_deviation(self) -> float:
        return abs(self.spacing - self.predicted_spacing) / self.predicted_spacing


def _check_double_slit_screen(timeline: Timeline, screen: float, edge_margin: int):
    grid = timeline.grid
    if grid.dims != 2:
        raise ConfigError("fringe analysis requires a 2D timeline")
    lo, hi = trusted_bounds(grid, edge_margin)
    if not lo[0] <= screen <= hi[0]:
        raise ConfigError(f"screen coordinate {screen} lies outside the trusted domain [{lo[0]:.4g}, {hi[0]:.4g}]")


def _screen_snapshot(timeline: Timeline, screen: float, snapshot):
    if snapshot is not None:
        return int(snapshot) % len(timeline)
    return int(np.argmin(np.abs(_centroids(timeline) - screen)))


def _bracketed(points: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return points[(points > lo) & (points < hi)]


def fringe_profile(timeline: Timeline, screen_coordinate: float, slit_separation: float,
                   snapshot: int | None = None, edge_margin: int = DEFAULT_EDGE_MARGIN) -> FringeProfile:
    """Transverse density along the line ``x = screen_coordinate``.

    Unless ``snapshot`` is given, the snapshot whose density centroid is
    closest to the screen is used. The far-field prediction is
    ``lambda * L / d`` with ``lambda = 2 pi hbar / (m v)``, ``v`` the mean
    forward velocity and ``L`` the distance travelled by the centroid.
    """
    _check_double_slit_screen(timeline, screen_coordinate, edge_margin)
    if slit_separation <= 0:
        raise ConfigError("slit separation must be positive")
    grid = timeline.grid
    units = timeline.units
    k = _screen_snapshot(timeline, screen_coordinate, snapshot)
    ix = _axis_index(grid.axes[0], screen_coordinate)
    y = grid.axes[1]
    rho = np.abs(timeline.psi[k][ix]) ** 2
    valid = _envelope(rho)
    maxima, _ = local_extrema(rho, y, "max", valid)
    minima, _ = local_extrema(rho, y, "min", valid)
    notes = []
    if len(maxima) >= 2:
        minima = _bracketed(minima, maxima[0], maxima[-1])
        spacing = float(np.median(np.diff(maxima)))
    else:
        spacing = float("nan")
        msg = f"only {len(maxima)} maxima at the screen; interference pattern is underdeveloped"
        warnings.warn(msg)
        notes.append(msg)
    velocity = units.hbar * _mean_wavenumber(timeline.psi[0], grid, 0) / units.mass
    wavelength = 2 * np.pi * units.hbar / (units.mass * abs(velocity)) if velocity else float("inf")
    cents = _centroids(timeline)
    distance = float(cents[k] - cents[0])
    predicted = wavelength * abs(distance) / slit_separation
    return FringeProfile(y, rho, maxima, minima, spacing, predicted, wavelength, distance, k, ix, notes)


def canyon_map(timeline: Timeline, rho_floor: float = DEFAULT_RHO_FLOOR, indices=None) -> list:
    """Quantum potential per snapshot, NaN where the density is below the floor."""
    indices = range(len(timeline)) if indices is None else indices
    out = []
    for i in indices:
        psi = timeline.snapshot(i)
        out.append(decompose(psi, timeline.units, rho_floor).v_q)
    return out


@dataclass(eq=False)
class CanyonReport:
    coords: np.ndarray
    v_q: np.ndarray
    canyon_minima: np.ndarray
    density_minima: np.ndarray
    offsets: np.ndarray  # distance from each density minimum to the nearest canyon
    snapshot: int
    spacing: float

    @property
    def counts_match(self) -> bool:
        return len(self.canyon_minima) == len(self.density_minima)

    @property
    def max_offset(self) -> float:
        return float(np.max(self.offsets)) if len(self.offsets) else 0.0


def canyon_report(timeline: Timeline, screen_coordinate: float, snapshot: int | None = None,
                  rho_floor: float = DEFAULT_RHO_FLOOR, edge_margin: int = DEFAULT_EDGE_MARGIN) -> CanyonReport:
    """Compare transverse quantum-potential troughs with density minima at the screen.

    Both sets of minima are counted between the outermost density maxima,
    where the interference pattern lives.
    """
    _check_double_slit_screen(timeline, screen_coordinate, edge_margin)
    grid = timeline.grid
    k = _screen_snapshot(timeline, screen_coordinate, snapshot)
    ix = _axis_index(grid.axes[0], screen_coordinate)
    y = grid.axes[1]
    vq = canyon_map(timeline, rho_floor, [k])[0].values[ix]
    rho = np.abs(timeline.psi[k][ix]) ** 2
    valid = _envelope(rho)
    maxima, _ = local_extrema(rho, y, "max", valid)
    rho_min, _ = local_extrema(rho, y, "min", valid)
    vq_min = np.sort(np.concatenate([local_extrema(vq, y, "min", valid)[0], _masked_runs(vq, y, valid)[0]]))
    if len(maxima) >= 2:
        rho_min = _bracketed(rho_min, maxima[0], maxima[-1])
        vq_min = _bracketed(vq_min, maxima[0], maxima[-1])
    if len(vq_min):
        offsets = np.array([np.min(np.abs(vq_min - m)) for m in rho_min])
    else:
        offsets = np.full(len(rho_min), np.inf)
    return CanyonReport(y, vq, vq_min, rho_min, offsets, k, grid.spacing[1])


def undulation(trajectory, fields: GuidanceFields, axis: int = -1, rel_tol: float = 1e-9) -> int:
    """Sign changes of the transverse velocity sampled at the recorded positions.

    Velocities below ``rel_tol`` times the largest field speed over the
    sampled snapshots count as zero, so rounding noise on a symmetry line or
    in an initially static field is ignored.
    """
    grid = fields.grid
    n = len(trajectory.positions)
    v = np.empty(n)
    scale = np.empty(n)
    for i in range(n):
        f = fields(i)
        v[i] = interpolate(f, grid, trajectory.positions[i:i + 1])[0, axis]
        scale[i] = np.nanmax(np.abs(f)) if np.any(np.isfinite(f)) else 0.0
    keep = np.isfinite(v) & (np.abs(v) > rel_tol * np.max(scale, initial=0.0))
    return int(np.count_nonzero(np.diff(np.sign(v[keep])) != 0))


@dataclass(eq=False)
class StreamlineMap:
    trajectories: list
    seeds: np.ndarray
    undulations: list


def streamline_map(timeline: Timeline, seed_line, substeps: int = 4, rho_floor: float = DEFAULT_RHO_FLOOR,
                   edge_margin: int = DEFAULT_EDGE_MARGIN) -> StreamlineMap:
    """Bohm streamlines from evenly spaced seeds on a transverse line.

    ``seed_line`` is ``(x, y_lo, y_hi, count)`` in 2D or ``(x_lo, x_hi, count)``
    in 1D; seed positions include both end points.
    """
    grid = timeline.grid
    if grid.dims == 2:
        x, y_lo, y_hi, count = seed_line
        seeds = np.column_stack([np.full(int(count), float(x)), np.linspace(y_lo, y_hi, int(count))])
    else:
        x_lo, x_hi, count = seed_line
        seeds = np.linspace(x_lo, x_hi, int(count))[:, None]
    lo, hi = np.array(grid.lower), np.array(grid.upper)
    if np.any((seeds < lo) | (seeds > hi)):
        raise ConfigError("seed line leaves the domain")
    fields = GuidanceFields(timeline, rho_floor, cache=len(timeline) + 1)
    pos, ex = _integrate(timeline, seeds, "bohm", substeps, fields, edge_margin=edge_margin)
    trajs = [_to_trajectory(timeline, "bohm", pos[k], ex[k], None, k) for k in range(len(seeds))]
    und = [undulation(t, fields) for t in trajs]
    return StreamlineMap(trajs, seeds, und)


@dataclass(eq=False)
class DispersionReport:
    times: np.ndarray
    dx: np.ndarray  # (T, dims) position std from rho
    dp_quantum: np.ndarray  # (T, dims) momentum std from |FFT psi|^2
    dp_bohm: np.ndarray  # (T, dims) mass * std of guidance velocity at member positions; NaN without an ensemble
    hbar: float

    @property
    def product_quantum(self) -> np.ndarray:
        return self.dx * self.dp_quantum

    @property
    def product_bohm(self) -> np.ndarray:
        return self.dx * self.dp_bohm


def _position_std(psi: np.ndarray, grid: Grid) -> np.ndarray:
    rho = np.abs(psi) ** 2
    rho = rho / rho.sum()
    out = []
    for x in grid.mesh:
        mean = np.sum(rho * x)
        out.append(np.sqrt(max(np.sum(rho * (x - mean) ** 2), 0.0)))
    return np.array(out)


def _momentum_std(psi: np.ndarray, grid: Grid, hbar: float) -> np.ndarray:
    spec = np.abs(sfft.fftn(psi, workers=FFT_WORKERS)) ** 2
    spec = spec / spec.sum()
    out = []
    for k in grid.k_mesh:
        mean = np.sum(spec * k)
        out.append(hbar * np.sqrt(max(np.sum(spec * (k - mean) ** 2), 0.0)))
    return np.array(out)


def dispersion_report(timeline: Timeline, ensemble: TrajectoryEnsemble | None = None,
                      rho_floor: float = DEFAULT_RHO_FLOOR) -> DispersionReport:
    """Position and momentum spreads per snapshot, quantum and Bohmian."""
    grid = timeline.grid
    units = timeline.units
    if ensemble is not None and (ensemble.timeline is not timeline
                                 and not np.array_equal(ensemble.timeline.times, timeline.times)):
        raise ConfigError("ensemble was computed on a different timeline")
    n = len(timeline)
    dx = np.empty((n, grid.dims))
    dpq = np.empty((n, grid.dims))
    dpb = np.full((n, grid.dims), np.nan)
    fields = GuidanceFields(timeline, rho_floor) if ensemble is not None else None
    for i in range(n):
        dx[i] = _position_std(timeline.psi[i], grid)
        dpq[i] = _momentum_std(timeline.psi[i], grid, units.hbar)
        if fields is not None:
            pos, _ = ensemble.positions_at(i)
            if len(pos):
                v = interpolate(fields(i), grid, pos)
                v = v[np.all(np.isfinite(v), axis=1)]
                if len(v):
                    dpb[i] = units.mass * np.std(v, axis=0)
    return DispersionReport(np.array(timeline.times), dx, dpq, dpb, units.hbar)


def _hat_primitive(edges: np.ndarray, nodes: np.ndarray, h: float) -> np.ndarray:
    """Integral of each hat basis function from -inf to each edge, shape (edges, nodes)."""
    u = (edges[:, None] - nodes[None, :]) / h
    out = np.where(u <= -1, 0.0, np.where(u <= 0, 0.5 * (u + 1) ** 2, np.where(u <= 1, 1 - 0.5 * (1 - u) ** 2, 1.0)))
    return h * out


def _bin_matrix(axis: np.ndarray, h: float, lo: float, hi: float, bins: int) -> np.ndarray:
    edges = np.linspace(lo, hi, bins + 1)
    prim = _hat_primitive(edges, axis, h)
    return np.diff(prim, axis=0)


def _default_bins(grid: Grid) -> tuple:
    return (64,) if grid.dims == 1 else (32, 32)


def binned_density(rho: RealField, bins=None, edge_margin: int = DEFAULT_EDGE_MARGIN) -> np.ndarray:
    """Exact bin integrals of the (bi)linear interpolant of ``rho`` over the trusted domain, normalized."""
    grid = rho.grid
    bins = _default_bins(grid) if bins is None else tuple(np.atleast_1d(bins).tolist())
    if len(bins) == 1 and grid.dims == 2:
        bins = bins * 2
    lo, hi = trusted_bounds(grid, edge_margin)
    mats = [_bin_matrix(ax, h, a, b, n) for ax, h, a, b, n in zip(grid.axes, grid.spacing, lo, hi, bins)]
    values = np.asarray(rho.values, dtype=float)
    if grid.dims == 1:
        out = mats[0] @ values
    else:
        out = mats[0] @ values @ mats[1].T
    total = out.sum()
    return out / total if total > 0 else out


def ensemble_histogram(positions: np.ndarray, grid: Grid, bins=None, edge_margin: int = DEFAULT_EDGE_MARGIN) -> np.ndarray:
    bins = _default_bins(grid) if bins is None else tuple(np.atleast_1d(bins).tolist())
    if len(bins) == 1 and grid.dims == 2:
        bins = bins * 2
    lo, hi = trusted_bounds(grid, edge_margin)
    hist, _ = np.histogramdd(np.asarray(positions).reshape(-1, grid.dims), bins=bins,
                             range=list(zip(lo, hi)))
    total = hist.sum()
    return hist / total if total > 0 else hist


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Half the L1 distance between two histograms, each normalized to unit mass."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ConfigError("histograms must have the same shape")
    ps, qs = p.sum(), q.sum()
    p = p / ps if ps > 0 else p
    q = q / qs if qs > 0 else q
    return float(min(1.0, 0.5 * np.abs(p - q).sum()))


@dataclass(frozen=True)
class Equivariance:
    distance: float
    exclusion_fraction: float
    members_used: int

    def __float__(self):
        return self.distance


def equivariance_distance(timeline: Timeline, ensemble: TrajectoryEnsemble, snapshot_index: int,
                          bins=None, edge_margin: int = DEFAULT_EDGE_MARGIN,
                          max_exclusion: float = 0.2) -> Equivariance:
    """TV distance between the ensemble histogram and the binned density at a snapshot."""
    idx = int(snapshot_index) % len(timeline)
    pos, exited = ensemble.positions_at(idx)
    total = len(ensemble.trajectories)
    frac = exited / total if total else 1.0
    if frac > max_exclusion:
        raise UnreliableStatisticsError(f"{frac:.1%} of members exited before snapshot {idx}")
    rho = RealField(timeline.grid, np.abs(timeline.psi[idx]) ** 2)
    target = binned_density(rho, bins, edge_margin)
    hist = ensemble_histogram(pos, timeline.grid, bins, edge_margin)
    return Equivariance(tv_distance(hist, target), frac, len(pos))
