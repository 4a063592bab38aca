"""Scenario orchestration: solve, analyze, integrate, diagnose, write."""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig, canonicalize, validate
from .diagnostics import (
    canyon_report,
    dispersion_report,
    equivariance_distance,
    fringe_profile,
    streamline_map,
)
from .errors import BranchWrapError, ConfigError, InvalidLoopError, MadelabError, UnreliableStatisticsError
from .grid import RealField
from .io import file_digest, write_columns, write_field, write_trajectories
from .madelung import circulation, continuity_residual, decompose, find_nodes, hj_residual, velocity_field
from .tdse import build_initial_state, build_potential, evolve, stationary_filter
from .trajectories import run_ensemble

log = logging.getLogger(__name__)

__all__ = ["RunManifest", "StageError", "run_scenario"]

MANIFEST = "manifest.json"
TIMINGS = "timings.json"


class StageError(MadelabError, RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunManifest:
    config: str
    version: str
    seeds: dict
    outputs: dict = field(default_factory=dict)  # relative path -> sha256
    warnings: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    wall_time: dict = field(default_factory=dict)
    failed_stage: str | None = None
    error: str | None = None

    def to_json(self) -> str:
        """Deterministic document; wall times are kept out and written separately."""
        doc = {
            "tool": "madelab",
            "version": self.version,
            "config": self.config,
            "seeds": self.seeds,
            "stages": self.stages,
            "warnings": self.warnings,
            "failed_stage": self.failed_stage,
            "error": self.error,
            "outputs": dict(sorted(self.outputs.items())),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _clean(obj):
    """Make diagnostics JSON-safe: arrays to lists, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


class _Run:
    def __init__(self, cfg: ScenarioConfig, out: Path, threads: int):
        self.cfg = cfg
        self.out = out
        self.threads = max(1, int(threads))
        self.manifest = RunManifest(
            config=canonicalize(cfg),
            version=__version__,
            seeds={"trajectories": cfg.trajectories.seed},
        )
        self.diag: dict = {}

    def wants(self, artifact: str) -> bool:
        return artifact in self.cfg.output.artifacts

    def record(self, path: Path):
        self.manifest.outputs[path.relative_to(self.out).as_posix()] = file_digest(path)

    def stage(self, name, fn):
        t0 = time.perf_counter()
        try:
            result = fn()
        except OSError as exc:
            self.fail(name, exc)
            raise
        except Exception as exc:
            self.fail(name, exc)
            raise StageError(name, exc) from exc
        self.manifest.wall_time[name] = time.perf_counter() - t0
        self.manifest.stages.append(name)
        log.info("stage %s done in %.2fs", name, self.manifest.wall_time[name])
        return result

    def fail(self, name, exc):
        self.manifest.failed_stage = name
        self.manifest.error = f"{type(exc).__name__}: {exc}"
        try:
            self.write_manifest()
        except OSError:
            log.error("could not write manifest after failure in %s", name)

    def write_manifest(self):
        (self.out / MANIFEST).write_text(self.manifest.to_json())
        (self.out / TIMINGS).write_text(json.dumps(self.manifest.wall_time, indent=2, sort_keys=True) + "\n")

    # -- stages ---------------------------------------------------------

    def solve(self):
        cfg = self.cfg
        grid = cfg.grid.build()
        potential = build_potential(cfg.potential, grid, cfg.units)
        psi0 = build_initial_state(cfg.initial, grid, cfg.units)
        if cfg.initial.refine:
            period = 2 * math.pi / cfg.potential.omega
            psi0 = stationary_filter(psi0, potential, cfg.solver.dt, period, cfg.units)
        s = cfg.solver
        tl = evolve(psi0, potential, s.total_time, s.dt, s.snapshot_stride, cfg.units)
        self.manifest.warnings.extend(tl.warnings)
        norms = tl.norms()
        self.diag["norm_drift"] = float(np.max(np.abs(norms - norms[0])))
        return tl

    def fields(self, tl):
        cfg = self.cfg
        n = len(tl)
        every = cfg.output.field_every
        chosen = sorted(set(range(0, n, every)) | {n - 1})
        fdir = self.out / "fields"
        if any(self.wants(a) for a in ("psi", "rho", "vq")) and "madfield" in cfg.output.formats:
            fdir.mkdir(exist_ok=True)
        for i in chosen:
            psi = tl.snapshot(i)
            if "madfield" not in cfg.output.formats:
                break
            if self.wants("psi"):
                p = fdir / f"psi_{i:05d}.madf"
                write_field(psi, p)
                self.record(p)
            if self.wants("rho") or self.wants("vq"):
                mf = decompose(psi, cfg.units, cfg.diagnostics.rho_floor)
                if self.wants("rho"):
                    p = fdir / f"rho_{i:05d}.madf"
                    write_field(mf.rho, p)
                    self.record(p)
                if self.wants("vq"):
                    p = fdir / f"vq_{i:05d}.madf"
                    write_field(mf.v_q, p)
                    self.record(p)
        if n >= 3:
            window = tl.window(n // 2)
            cont = continuity_residual(window)
            self.diag["continuity_residual"] = {"time": float(tl.times[n // 2]), "max_abs": cont.max_abs, "l2": cont.l2}
            try:
                hj = hj_residual(window, cfg.diagnostics.residual_floor)
                self.diag["hj_residual"] = {"time": float(tl.times[n // 2]), "max_abs": hj.max_abs, "l2": hj.l2}
            except BranchWrapError as exc:
                self.diag["hj_residual"] = {"skipped": str(exc)}
                self.manifest.warnings.append(f"hj_residual skipped: {exc}")
        vf = velocity_field(tl.snapshot(n - 1), cfg.units, cfg.diagnostics.rho_floor)
        self.diag["velocity_consistency"] = vf.consistency
        if tl.grid.dims == 2:
            nodes = find_nodes(tl.snapshot(n - 1), cfg.diagnostics.rho_floor)
            self.diag["nodes"] = {
                "count": len(nodes),
                "total_winding": nodes.total_winding,
                "list": [{"position": list(nd.position), "winding": nd.winding} for nd in nodes.nodes[:100]],
            }
            if cfg.diagnostics.loop:
                try:
                    circ = circulation(vf, cfg.diagnostics.loop, cfg.units)
                    self.diag["circulation"] = {"value": circ.value, "winding_estimate": circ.winding_estimate,
                                                "deviation": circ.deviation}
                except InvalidLoopError as exc:
                    self.diag["circulation"] = {"skipped": str(exc)}

    def trajectories(self, tl):
        t = self.cfg.trajectories
        ens = run_ensemble(tl, t.count, t.kind, t.seed, t.substeps, t.osmotic_drift,
                           self.cfg.diagnostics.rho_floor, self.cfg.grid.edge_margin, self.threads)
        if ens.failures:
            self.manifest.warnings.append(f"{len(ens.failures)} ensemble members failed to start")
        if self.wants("trajectories") and "text" in self.cfg.output.formats:
            p = self.out / "trajectories.txt"
            write_trajectories(ens.trajectories, p, self.cfg.output.trajectory_members or None)
            self.record(p)
        return ens

    def diagnostics(self, tl, ens):
        cfg = self.cfg
        d = cfg.diagnostics
        margin = cfg.grid.edge_margin
        rep = dispersion_report(tl, ens, d.rho_floor)
        self.diag["dispersion"] = {
            "times": rep.times[[0, -1]],
            "dx": rep.dx[[0, -1]],
            "dp_quantum": rep.dp_quantum[[0, -1]],
            "dp_bohm": rep.dp_bohm[[0, -1]],
            "min_product_quantum": float(np.min(rep.product_quantum)),
        }
        if ens is not None:
            bins = d.bins or None
            try:
                eq = equivariance_distance(tl, ens, len(tl) - 1, bins, margin)
                self.diag["equivariance"] = {"tv": eq.distance, "exclusion_fraction": eq.exclusion_fraction,
                                             "members_used": eq.members_used}
            except UnreliableStatisticsError as exc:
                self.diag["equivariance"] = {"skipped": str(exc)}
                self.manifest.warnings.append(str(exc))
            crossings = 0
            if tl.grid.dims == 2 and cfg.initial.kind == "two_gaussian_slits":
                axis = cfg.initial.center[1] if len(cfg.initial.center) > 1 else 0.0
                for traj in ens.trajectories:
                    if not traj.exited:
                        s = np.sign(traj.positions[:, 1] - axis)
                        crossings += int(np.any(s != s[0]))
                self.diag["axis_crossings"] = crossings
        if d.screen is not None:
            fp = fringe_profile(tl, d.screen, cfg.initial.separation, edge_margin=margin)
            self.manifest.warnings.extend(fp.warnings)
            cr = canyon_report(tl, d.screen, fp.snapshot, d.rho_floor, margin)
            self.diag["fringe"] = {
                "snapshot": fp.snapshot, "maxima": fp.maxima, "minima": fp.minima, "spacing": fp.spacing,
                "predicted_spacing": fp.predicted_spacing, "relative_deviation": fp.relative_deviation,
            }
            self.diag["canyons"] = {"minima": cr.canyon_minima, "density_minima": cr.density_minima,
                                    "offsets": cr.offsets, "counts_match": cr.counts_match}
            if self.wants("fringe") and "text" in cfg.output.formats:
                p = self.out / "fringe.txt"
                write_columns(p, "y rho v_q", [fp.coords, fp.density, cr.v_q])
                self.record(p)
        if d.streamline_seeds:
            line = tuple(d.streamline_line) + (d.streamline_seeds,)
            sm = streamline_map(tl, line, cfg.trajectories.substeps, d.rho_floor, margin)
            self.diag["streamline_undulations"] = sm.undulations
            if self.wants("streamlines") and "text" in cfg.output.formats:
                p = self.out / "streamlines.txt"
                write_trajectories(sm.trajectories, p)
                self.record(p)
        if self.wants("diagnostics"):
            p = self.out / "diagnostics.json"
            p.write_text(json.dumps(_clean(self.diag), indent=2, sort_keys=True) + "\n")
            self.record(p)


def run_scenario(cfg: ScenarioConfig, output_dir=None, threads: int = 1) -> RunManifest:
    """Run the full pipeline and write artifacts plus ``manifest.json``.

    Validation happens before the output directory is touched. A failing
    stage leaves earlier artifacts in place, records itself in the manifest
    and raises :class:`StageError` (``OSError`` passes through unchanged).
    """
    validate(cfg)
    out = Path(output_dir if output_dir is not None else cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    run = _Run(cfg, out, threads)
    tl = run.stage("solve", run.solve)
    run.stage("fields", lambda: run.fields(tl))
    ens = None
    if cfg.trajectories.count > 0:
        ens = run.stage("trajectories", lambda: run.trajectories(tl))
    run.stage("diagnostics", lambda: run.diagnostics(tl, ens))
    try:
        run.write_manifest()
    except OSError as exc:
        run.fail("manifest", exc)
        raise
    return run.manifest
