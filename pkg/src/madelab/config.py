"""Scenario configuration: parsing, validation and canonical text form.

The format is line oriented::

    # comment
    [section]
    key = value
    list_key = 1.0, 2.0

Unknown sections or keys are rejected; every error names its section and key.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError
from .grid import Grid, make_grid
from .tdse import (
    POTENTIAL_KINDS,
    STATE_KINDS,
    InitialStateSpec,
    PotentialSpec,
    Units,
    build_initial_state,
    build_potential,
)
from .trajectories import DEFAULT_EDGE_MARGIN, KINDS as TRAJECTORY_KINDS

__all__ = [
    "GridSpec",
    "SolverSpec",
    "TrajectorySpec",
    "DiagnosticsSpec",
    "OutputSpec",
    "ScenarioConfig",
    "parse_config",
    "canonicalize",
    "validate",
    "ARTIFACTS",
]

ARTIFACTS = ("psi", "rho", "vq", "trajectories", "streamlines", "fringe", "diagnostics")
FORMATS = ("madfield", "text")


@dataclass(frozen=True)
class GridSpec:
    dims: int = 1
    extents: tuple[float, ...] = (20.0,)
    points: tuple[int, ...] = (256,)
    edge_margin: int = DEFAULT_EDGE_MARGIN

    def build(self) -> Grid:
        return make_grid(self.dims, self.extents, self.points)


@dataclass(frozen=True)
class SolverSpec:
    dt: float = 1e-3
    total_time: float = 1.0
    snapshot_stride: int = 10


@dataclass(frozen=True)
class TrajectorySpec:
    kind: str = "bohm"
    count: int = 0
    seed: int = 0
    substeps: int = 4
    osmotic_drift: bool = True


@dataclass(frozen=True)
class DiagnosticsSpec:
    screen: float | None = None
    bins: tuple[int, ...] = ()
    rho_floor: float = 1e-12
    residual_floor: float = 1e-8
    streamline_seeds: int = 0
    streamline_line: tuple[float, ...] = ()
    loop: tuple[float, ...] = ()


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "run"
    formats: tuple[str, ...] = FORMATS
    artifacts: tuple[str, ...] = ("rho", "vq", "trajectories", "streamlines", "fringe", "diagnostics")
    field_every: int = 10
    trajectory_members: int = 500


@dataclass(frozen=True)
class ScenarioConfig:
    units: Units = field(default_factory=Units)
    grid: GridSpec = field(default_factory=GridSpec)
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    initial: InitialStateSpec = field(default_factory=InitialStateSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    trajectories: TrajectorySpec = field(default_factory=TrajectorySpec)
    diagnostics: DiagnosticsSpec = field(default_factory=DiagnosticsSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    def with_overrides(self, seed: int | None = None, directory: str | None = None) -> "ScenarioConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, trajectories=replace(cfg.trajectories, seed=int(seed)))
        if directory is not None:
            cfg = replace(cfg, output=replace(cfg.output, directory=str(directory)))
        return cfg


SECTIONS = {
    "units": Units,
    "grid": GridSpec,
    "potential": PotentialSpec,
    "initial": InitialStateSpec,
    "solver": SolverSpec,
    "trajectories": TrajectorySpec,
    "diagnostics": DiagnosticsSpec,
    "output": OutputSpec,
}

# value kinds per (section, key)
_KINDS = {
    ("units", "hbar"): "float", ("units", "mass"): "float",
    ("grid", "dims"): "int", ("grid", "extents"): "floats", ("grid", "points"): "ints",
    ("grid", "edge_margin"): "int",
    ("potential", "kind"): "str", ("potential", "omega"): "float", ("potential", "center"): "floats",
    ("potential", "position"): "float", ("potential", "thickness"): "float", ("potential", "height"): "float",
    ("potential", "apertures"): "pairs",
    ("initial", "kind"): "str", ("initial", "center"): "floats", ("initial", "width"): "floats",
    ("initial", "momentum"): "floats", ("initial", "separation"): "float", ("initial", "slit_width"): "float",
    ("initial", "longitudinal_width"): "optfloat", ("initial", "phase"): "float", ("initial", "omega"): "float",
    ("initial", "displacement"): "floats", ("initial", "winding"): "int", ("initial", "refine"): "bool",
    ("solver", "dt"): "float", ("solver", "total_time"): "float", ("solver", "snapshot_stride"): "int",
    ("trajectories", "kind"): "str", ("trajectories", "count"): "int", ("trajectories", "seed"): "int",
    ("trajectories", "substeps"): "int", ("trajectories", "osmotic_drift"): "bool",
    ("diagnostics", "screen"): "optfloat", ("diagnostics", "bins"): "ints", ("diagnostics", "rho_floor"): "float",
    ("diagnostics", "residual_floor"): "float", ("diagnostics", "streamline_seeds"): "int",
    ("diagnostics", "streamline_line"): "floats", ("diagnostics", "loop"): "floats",
    ("output", "directory"): "str", ("output", "formats"): "strs", ("output", "artifacts"): "strs",
    ("output", "field_every"): "int", ("output", "trajectory_members"): "int",
}


def _split(text: str):
    return [p.strip() for p in text.split(",") if p.strip()]


def _convert(kind: str, raw: str, where: str):
    raw = raw.strip()
    try:
        if kind == "float":
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError("not finite")
            return value
        if kind == "optfloat":
            return None if raw.lower() in ("", "none") else _convert("float", raw, where)
        if kind == "int":
            return int(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if kind == "str":
            return raw
        if kind == "floats":
            return tuple(_convert("float", p, where) for p in _split(raw))
        if kind == "ints":
            return tuple(int(p) for p in _split(raw))
        if kind == "strs":
            return tuple(_split(raw))
        if kind == "pairs":
            out = []
            for p in _split(raw):
                center, width = p.split(":")
                out.append((float(center), float(width)))
            return tuple(out)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: cannot read {raw!r} as {kind}: {exc}") from None
    raise AssertionError(kind)


def _format(kind: str, value) -> str:
    if kind in ("float", "optfloat"):
        return "none" if value is None else repr(float(value))
    if kind == "bool":
        return "true" if value else "false"
    if kind in ("int", "str"):
        return str(value)
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind in ("ints", "strs"):
        return ", ".join(str(v) for v in value)
    if kind == "pairs":
        return ", ".join(f"{float(c)!r}:{float(w)!r}" for c, w in value)
    raise AssertionError(kind)


def parse_config(text: str, check: bool = True) -> ScenarioConfig:
    """Parse and (by default) fully validate a scenario configuration."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",),
                                       interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    parts = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"[{section}]: unknown section; expected one of {', '.join(SECTIONS)}")
        values = {}
        for key, raw in parser.items(section):
            where = f"[{section}] {key}"
            if (section, key) not in _KINDS:
                raise ConfigError(f"{where}: unknown key")
            values[key] = _convert(_KINDS[(section, key)], raw, where)
        try:
            parts[section] = SECTIONS[section](**values)
        except ConfigError as exc:
            raise ConfigError(f"[{section}]: {exc}") from None
    cfg = ScenarioConfig(**parts)
    if check:
        validate(cfg)
    return cfg


def canonicalize(cfg: ScenarioConfig) -> str:
    """Deterministic text form listing every key; ``parse_config`` reads it back to an equal config."""
    lines = []
    for section, cls in SECTIONS.items():
        obj = getattr(cfg, section)
        lines.append(f"[{section}]")
        for f in fields(cls):
            lines.append(f"{f.name} = {_format(_KINDS[(section, f.name)], getattr(obj, f.name))}")
        lines.append("")
    return "\n".join(lines)


def _fail(section, key, msg):
    raise ConfigError(f"[{section}] {key}: {msg}")


def validate(cfg: ScenarioConfig) -> None:
    """Check every spec against its module preconditions; raise ConfigError on the first violation."""
    g = cfg.grid
    if g.dims not in (1, 2):
        _fail("grid", "dims", f"must be 1 or 2, got {g.dims}")
    for key in ("extents", "points"):
        if len(getattr(g, key)) != g.dims:
            _fail("grid", key, f"needs {g.dims} entries")
    for n in g.points:
        if n < 8 or n & (n - 1):
            _fail("grid", "points", f"{n} is not a power of two >= 8")
    for length in g.extents:
        if length <= 0:
            _fail("grid", "extents", "must be positive")
    if g.edge_margin < 1 or any(2 * g.edge_margin + 4 > n for n in g.points):
        _fail("grid", "edge_margin", "must be >= 1 and leave at least 4 interior cells")
    grid = g.build()

    if cfg.potential.kind not in POTENTIAL_KINDS:
        _fail("potential", "kind", f"unknown kind {cfg.potential.kind!r}")
    if cfg.initial.kind not in STATE_KINDS:
        _fail("initial", "kind", f"unknown kind {cfg.initial.kind!r}")
    try:
        potential = build_potential(cfg.potential, grid, cfg.units)
    except ConfigError as exc:
        raise ConfigError(f"[potential]: {exc}") from None
    try:
        build_initial_state(cfg.initial, grid, cfg.units)
    except ConfigError as exc:
        raise ConfigError(f"[initial]: {exc}") from None
    if cfg.initial.refine and cfg.potential.kind != "harmonic":
        _fail("initial", "refine", "stationary refinement needs a harmonic potential")
    del potential

    s = cfg.solver
    if s.dt <= 0:
        _fail("solver", "dt", "must be positive")
    if s.total_time < 0:
        _fail("solver", "total_time", "must be non-negative")
    if s.snapshot_stride < 1:
        _fail("solver", "snapshot_stride", "must be >= 1")
    n = round(s.total_time / s.dt)
    if abs(n * s.dt - s.total_time) > 1e-9 * max(1.0, s.total_time):
        _fail("solver", "total_time", f"{s.total_time} is not an integer multiple of dt={s.dt}")
    if n % s.snapshot_stride:
        _fail("solver", "snapshot_stride", f"must divide the step count {n}")

    t = cfg.trajectories
    if t.kind not in TRAJECTORY_KINDS:
        _fail("trajectories", "kind", f"unknown kind {t.kind!r}")
    if t.count < 0:
        _fail("trajectories", "count", "must be >= 0")
    if t.substeps < 1:
        _fail("trajectories", "substeps", "must be >= 1")
    if t.seed < 0:
        _fail("trajectories", "seed", "must be >= 0")

    d = cfg.diagnostics
    if d.bins and (len(d.bins) != g.dims or min(d.bins) < 1):
        _fail("diagnostics", "bins", f"needs {g.dims} positive entries")
    if not 0 < d.rho_floor < 1:
        _fail("diagnostics", "rho_floor", "must lie in (0, 1)")
    if not 0 < d.residual_floor < 1:
        _fail("diagnostics", "residual_floor", "must lie in (0, 1)")
    if d.screen is not None:
        if g.dims != 2:
            _fail("diagnostics", "screen", "fringe analysis needs a 2D grid")
        if cfg.initial.kind != "two_gaussian_slits":
            _fail("diagnostics", "screen", "fringe analysis needs a two_gaussian_slits initial state")
        lo = grid.lower[0] + g.edge_margin * grid.spacing[0]
        hi = grid.upper[0] - g.edge_margin * grid.spacing[0]
        if not lo <= d.screen <= hi:
            _fail("diagnostics", "screen", f"{d.screen} lies outside the trusted domain [{lo:.4g}, {hi:.4g}]")
    if d.streamline_seeds < 0:
        _fail("diagnostics", "streamline_seeds", "must be >= 0")
    if d.streamline_seeds:
        need = 3 if g.dims == 2 else 2
        if len(d.streamline_line) != need:
            _fail("diagnostics", "streamline_line", f"needs {need} numbers")
    if d.loop:
        if g.dims != 2 or len(d.loop) != 4:
            _fail("diagnostics", "loop", "needs a 2D grid and x_lo, x_hi, y_lo, y_hi")

    o = cfg.output
    for a in o.artifacts:
        if a not in ARTIFACTS:
            _fail("output", "artifacts", f"unknown artifact {a!r}; expected from {ARTIFACTS}")
    for f in o.formats:
        if f not in FORMATS:
            _fail("output", "formats", f"unknown format {f!r}; expected from {FORMATS}")
    if o.field_every < 1:
        _fail("output", "field_every", "must be >= 1")
    if o.trajectory_members < 0:
        _fail("output", "trajectory_members", "must be >= 0")
    if not o.directory:
        _fail("output", "directory", "must not be empty")
