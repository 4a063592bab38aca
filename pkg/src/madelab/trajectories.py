"""Bohm streamlines and stochastic trajectories through a recorded Timeline.

Velocities come from the snapshots: bilinear (2D) or linear (1D) in space,
linear in time between neighbouring snapshots. A member exits when it
enters the edge margin or when its interpolation stencil touches the node
mask; no positions are recorded after that.

Fluctuating members follow Nelson-type dynamics, i.e. Euler-Maruyama steps
with the guidance velocity plus the osmotic drift ``(hbar/2m) grad ln rho`` and
white noise of diffusion constant ``hbar/2m``. Every member owns a random
stream derived from ``(seed, member index)``, so chunked or threaded runs
reproduce serial ones bit for bit.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateStateError
from .grid import Grid, RealField, spectral_gradient
from .madelung import DEFAULT_RHO_FLOOR, node_mask
from .tdse import Timeline

log = logging.getLogger(__name__)

__all__ = [
    "KINDS",
    "DEFAULT_EDGE_MARGIN",
    "Trajectory",
    "TrajectoryEnsemble",
    "GuidanceFields",
    "sample_initial_positions",
    "integrate_bohm",
    "fluctuating_trajectory",
    "run_ensemble",
    "trusted_bounds",
]

KINDS = ("bohm", "fluctuating")
DEFAULT_EDGE_MARGIN = 4  # grid cells
CHUNK = 1024


@dataclass(eq=False)
class Trajectory:
    kind: str
    times: np.ndarray
    positions: np.ndarray  # (n_recorded, dims); n_recorded <= len(times)
    exited: bool = False
    seed: int | None = None
    member: int = 0

    @property
    def final_position(self) -> np.ndarray:
        return self.positions[-1]


@dataclass(eq=False)
class TrajectoryEnsemble:
    trajectories: list
    timeline: Timeline
    kind: str
    seed: int
    count: int
    failures: list = field(default_factory=list)

    def positions_at(self, index: int):
        """Positions of members still inside the trusted domain at snapshot ``index``, plus the exited count."""
        keep = [t.positions[index] for t in self.trajectories if len(t.positions) > index]
        exited = len(self.trajectories) - len(keep)
        dims = self.timeline.grid.dims
        return (np.array(keep) if keep else np.empty((0, dims))), exited


def trusted_bounds(grid: Grid, edge_margin: int = DEFAULT_EDGE_MARGIN):
    lo = np.array(grid.lower) + edge_margin * np.array(grid.spacing)
    hi = np.array(grid.upper) - edge_margin * np.array(grid.spacing)
    return lo, hi


# -- sampling -------------------------------------------------------------

def _segment_fraction(a, b, u):
    """Inverse CDF on [0, 1] of the linear density running from a to b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = a + np.sqrt(np.maximum(a * a + u * (b * b - a * a), 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, u * (a + b) / denom, u)
    return np.clip(s, 0.0, 1.0)


def _sample_piecewise_linear(weights, u_seg, u_pos):
    """Sample segment index and in-segment fraction for node weights (..., n)."""
    seg_mass = 0.5 * (weights[..., :-1] + weights[..., 1:])
    cdf = np.cumsum(seg_mass, axis=-1)
    total = cdf[..., -1:]
    target = u_seg[..., None] * total
    idx = np.minimum(np.sum(cdf <= target, axis=-1), seg_mass.shape[-1] - 1)
    if weights.ndim == 1:
        a, b = weights[idx], weights[idx + 1]
    else:
        a = np.take_along_axis(weights, idx[..., None], -1)[..., 0]
        b = np.take_along_axis(weights, idx[..., None] + 1, -1)[..., 0]
    return idx, _segment_fraction(a, b, u_pos)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def sample_initial_positions(rho0: RealField, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` i.i.d. positions from the (bi)linear interpolant of ``rho0``.

    1D uses the inverse CDF directly; 2D samples x from the marginal and then
    y from the conditional density along the interpolated row.
    """
    if count < 1:
        raise ConfigError("count must be >= 1")
    rho = np.asarray(rho0.values, dtype=float)
    if np.any(rho < 0) or not np.all(np.isfinite(rho)):
        raise ConfigError("density must be finite and non-negative")
    if not np.any(rho > 0):
        raise DegenerateStateError("density is identically zero")
    grid = rho0.grid
    rng = _rng(seed, 0)
    u = rng.random((count, 2 * grid.dims))
    x_axis = grid.axes[0]
    dx = grid.spacing[0]
    if grid.dims == 1:
        idx, s = _sample_piecewise_linear(rho, u[:, 0], u[:, 1])
        return (x_axis[idx] + s * dx)[:, None]
    marginal = 0.5 * (rho[:, :-1] + rho[:, 1:]).sum(axis=1)
    i, s = _sample_piecewise_linear(marginal, u[:, 0], u[:, 1])
    rows = (1 - s)[:, None] * rho[i] + s[:, None] * rho[i + 1]
    j, t = _sample_piecewise_linear(rows, u[:, 2], u[:, 3])
    y_axis = grid.axes[1]
    return np.column_stack([x_axis[i] + s * dx, y_axis[j] + t * grid.spacing[1]])


# -- fields and interpolation -----------------------------------------------

class GuidanceFields:
    """Per-snapshot velocity (and osmotic drift) arrays, NaN on the node mask."""

    def __init__(self, timeline: Timeline, rho_floor: float = DEFAULT_RHO_FLOOR,
                 osmotic: bool = False, hbar: float | None = None, cache: int = 3):
        self.timeline = timeline
        self.grid = timeline.grid
        self.rho_floor = rho_floor
        self.osmotic = osmotic
        self.hbar = timeline.units.hbar if hbar is None else hbar
        self._cache: dict[int, np.ndarray] = {}
        self._cache_size = cache

    def __call__(self, index: int) -> np.ndarray:
        """Stacked drift components, shape (dims, *grid.shape)."""
        if index in self._cache:
            return self._cache[index]
        psi = self.timeline.psi[index]
        mask = node_mask(np.abs(psi) ** 2, self.rho_floor)
        safe = np.where(mask, 1.0, psi)
        units = self.timeline.units
        comps = []
        for d in spectral_gradient(psi, self.grid):
            q = d / safe
            v = (units.hbar / units.mass) * q.imag
            if self.osmotic:
                v = v + (self.hbar / units.mass) * q.real
            v[mask] = np.nan
            comps.append(v)
        out = np.stack(comps)
        if len(self._cache) >= self._cache_size:
            self._cache.pop(min(self._cache))
        self._cache[index] = out
        return out


def interpolate(fields: np.ndarray, grid: Grid, pos: np.ndarray) -> np.ndarray:
    """(Bi)linear interpolation of stacked component arrays at positions (M, dims).

    Any NaN in the stencil propagates to the result.
    """
    idx, frac = [], []
    for axis in range(grid.dims):
        f = (pos[:, axis] - grid.lower[axis]) / grid.spacing[axis]
        i = np.clip(np.floor(f).astype(np.int64), 0, grid.points[axis] - 2)
        idx.append(i)
        frac.append(f - i)
    if grid.dims == 1:
        (i,), (s,) = idx, frac
        out = fields[:, i] * (1 - s) + fields[:, i + 1] * s
    else:
        (i, j), (s, t) = idx, frac
        out = ((fields[:, i, j] * (1 - s) + fields[:, i + 1, j] * s) * (1 - t)
               + (fields[:, i, j + 1] * (1 - s) + fields[:, i + 1, j + 1] * s) * t)
    return out.T


# -- integration ------------------------------------------------------------

def _check_start(grid: Grid, x0: np.ndarray):
    lo = np.array(grid.lower)
    hi = np.array(grid.upper)
    bad = np.any((x0 < lo) | (x0 > hi) | ~np.isfinite(x0), axis=1)
    return bad


def _integrate(timeline: Timeline, x0: np.ndarray, kind: str, substeps: int, fields: GuidanceFields,
               seeds=None, seed: int = 0, members=None, edge_margin: int = DEFAULT_EDGE_MARGIN,
               threads: int = 1):
    """Advance all members through every snapshot interval.

    Returns positions (M, T, dims) with NaN after exit and the exit snapshot
    index per member (``T`` when the member never exits).
    """
    grid = timeline.grid
    n_t = len(timeline)
    m_count = len(x0)
    dims = grid.dims
    positions = np.full((m_count, n_t, dims), np.nan)
    exit_at = np.full(m_count, n_t, dtype=np.int64)
    lo, hi = trusted_bounds(grid, edge_margin)
    members = np.arange(m_count) if members is None else np.asarray(members)

    x = np.array(x0, dtype=float)
    inside = np.all((x >= lo) & (x <= hi), axis=1)
    start_v = interpolate(fields(0), grid, x) if m_count else np.empty((0, dims))
    active = inside & np.all(np.isfinite(start_v), axis=1)
    positions[:, 0] = x
    exit_at[~active] = 1

    rngs = None
    h = timeline.snapshot_interval / substeps
    if kind == "fluctuating":
        rngs = [_rng(seed, 1, int(k)) for k in members]
        noise_amp = np.sqrt(fields.hbar * h / timeline.units.mass)

    chunks = [np.arange(s, min(s + CHUNK, m_count)) for s in range(0, m_count, CHUNK)]
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 and len(chunks) > 1 else None

    def velocity(pos, t_frac, f0, f1):
        v0 = interpolate(f0, grid, pos)
        v1 = interpolate(f1, grid, pos)
        return (1 - t_frac) * v0 + t_frac * v1

    def bad(pos, v):
        return ~np.all(np.isfinite(v), axis=1) | ~np.all((pos >= lo) & (pos <= hi), axis=1)

    def advance(chunk, f0, f1, noise):
        sel = chunk[active[chunk]]
        if sel.size == 0:
            return
        pos = x[sel]
        alive = np.ones(sel.size, dtype=bool)
        for k in range(substeps):
            w0 = k / substeps
            w1 = (k + 1) / substeps
            if kind == "bohm":
                k1 = velocity(pos, w0, f0, f1)
                k2 = velocity(pos + 0.5 * h * k1, 0.5 * (w0 + w1), f0, f1)
                k3 = velocity(pos + 0.5 * h * k2, 0.5 * (w0 + w1), f0, f1)
                k4 = velocity(pos + h * k3, w1, f0, f1)
                new = pos + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                fail = bad(pos, k1) | bad(pos, k2) | bad(pos, k3) | bad(new, k4)
            else:
                drift = velocity(pos, w0, f0, f1)
                new = pos + h * drift + noise_amp * noise[sel, k]
                fail = bad(pos, drift) | ~np.all((new >= lo) & (new <= hi), axis=1)
            alive &= ~fail
            pos = np.where(alive[:, None], new, pos)
        x[sel] = pos
        dead = sel[~alive]
        active[dead] = False
        exit_dead.append(dead)

    try:
        for i in range(n_t - 1):
            f0, f1 = fields(i), fields(i + 1)
            noise = None
            if rngs is not None:
                noise = np.zeros((m_count, substeps, dims))
                for k in np.nonzero(active)[0]:
                    noise[k] = rngs[k].standard_normal((substeps, dims))
            exit_dead: list = []
            if pool is None:
                for c in chunks:
                    advance(c, f0, f1, noise)
            else:
                list(pool.map(lambda c: advance(c, f0, f1, noise), chunks))
            for dead in exit_dead:
                exit_at[dead] = i + 1
            positions[active, i + 1] = x[active]
    finally:
        if pool is not None:
            pool.shutdown()
    return positions, exit_at


def _to_trajectory(timeline, kind, positions, exit_index, seed, member):
    n_keep = int(exit_index)
    return Trajectory(kind, np.array(timeline.times), positions[:n_keep].copy(),
                      exited=n_keep < len(timeline), seed=seed, member=int(member))


def _single(timeline, x0, kind, substeps, fields, seed, edge_margin):
    x0 = np.atleast_1d(np.asarray(x0, dtype=float)).reshape(1, -1)
    if x0.shape[1] != timeline.grid.dims:
        raise ConfigError(f"x0 must have {timeline.grid.dims} coordinates")
    if _check_start(timeline.grid, x0)[0]:
        raise ConfigError(f"x0={x0[0].tolist()} lies outside the domain")
    if substeps < 1:
        raise ConfigError("substeps must be >= 1")
    pos, ex = _integrate(timeline, x0, kind, substeps, fields, seed=seed, edge_margin=edge_margin)
    return _to_trajectory(timeline, kind, pos[0], ex[0], seed if kind == "fluctuating" else None, 0)


def integrate_bohm(timeline: Timeline, x0, substeps: int = 4, rho_floor: float = DEFAULT_RHO_FLOOR,
                   edge_margin: int = DEFAULT_EDGE_MARGIN) -> Trajectory:
    """RK4 streamline of the guidance velocity starting at ``x0``."""
    fields = GuidanceFields(timeline, rho_floor)
    return _single(timeline, x0, "bohm", substeps, fields, None, edge_margin)


def fluctuating_trajectory(timeline: Timeline, x0, seed: int, substeps: int = 4, osmotic: bool = True,
                           hbar: float | None = None, rho_floor: float = DEFAULT_RHO_FLOOR,
                           edge_margin: int = DEFAULT_EDGE_MARGIN) -> Trajectory:
    """Euler-Maruyama path around the Bohm streamline.

    ``hbar`` overrides the value used for noise amplitude and osmotic drift
    only; the guidance velocity always comes from the timeline's units.
    """
    fields = GuidanceFields(timeline, rho_floor, osmotic=osmotic, hbar=hbar)
    return _single(timeline, x0, "fluctuating", substeps, fields, seed, edge_margin)


def run_ensemble(timeline: Timeline, count: int, kind: str = "bohm", seed: int = 0, substeps: int = 4,
                 osmotic: bool = True, rho_floor: float = DEFAULT_RHO_FLOOR,
                 edge_margin: int = DEFAULT_EDGE_MARGIN, threads: int = 1, x0=None) -> TrajectoryEnsemble:
    """Integrate ``count`` members started from Born-rule samples of the first snapshot."""
    if kind not in KINDS:
        raise ConfigError(f"unknown trajectory kind {kind!r}; expected one of {KINDS}")
    if count < 1:
        raise ConfigError("ensemble count must be >= 1")
    if substeps < 1:
        raise ConfigError("substeps must be >= 1")
    grid = timeline.grid
    if x0 is None:
        rho0 = RealField(grid, np.abs(timeline.psi[0]) ** 2)
        x0 = sample_initial_positions(rho0, count, seed)
    x0 = np.asarray(x0, dtype=float).reshape(count, grid.dims)
    fields = GuidanceFields(timeline, rho_floor, osmotic=(kind == "fluctuating" and osmotic))
    outside = _check_start(grid, x0)
    failures = [(int(k), "initial position outside the domain") for k in np.nonzero(outside)[0]]
    pos, ex = _integrate(timeline, x0, kind, substeps, fields, seed=seed, edge_margin=edge_margin,
                         threads=threads)
    members = [_to_trajectory(timeline, kind, pos[k], ex[k], seed if kind == "fluctuating" else None, k)
               for k in range(count)]
    return TrajectoryEnsemble(members, timeline, kind, seed, count, failures)
