"""Field files and plain-text artifact writers.

A field file is a short ASCII header followed by a blank line and the raw
little-endian payload in row-major order::

    MADFIELD 1
    dtype complex128
    dims 2
    points 256 256
    extents 128.0 64.0
    time 4.0

"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .grid import ComplexField, Field, Grid, RealField

__all__ = ["FieldHeader", "write_field", "read_field", "inspect_field", "write_trajectories",
           "read_trajectories", "write_columns", "file_digest"]

MAGIC = "MADFIELD"
VERSION = 1
DTYPES = {"complex128": np.dtype("<c16"), "float64": np.dtype("<f8")}
MAX_HEADER = 4096


@dataclass(frozen=True)
class FieldHeader:
    dtype: str
    dims: int
    points: tuple[int, ...]
    extents: tuple[float, ...]
    time: float
    payload_offset: int

    @property
    def payload_bytes(self) -> int:
        return int(np.prod(self.points)) * DTYPES[self.dtype].itemsize


def write_field(field: Field, path) -> None:
    grid = field.grid
    name = "complex128" if field.is_complex else "float64"
    header = "\n".join([
        f"{MAGIC} {VERSION}",
        f"dtype {name}",
        f"dims {grid.dims}",
        "points " + " ".join(str(n) for n in grid.points),
        "extents " + " ".join(repr(float(e)) for e in grid.extents),
        f"time {float(field.time)!r}",
        "",
        "",
    ]).encode("ascii")
    payload = np.ascontiguousarray(field.values, dtype=DTYPES[name]).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def _parse_header(raw: bytes) -> FieldHeader:
    end = raw.find(b"\n\n")
    if end < 0:
        raise FormatError("field header is not terminated by a blank line")
    try:
        lines = raw[:end].decode("ascii").split("\n")
    except UnicodeDecodeError:
        raise FormatError("field header is not ASCII") from None
    first = lines[0].split()
    if len(first) != 2 or first[0] != MAGIC:
        raise FormatError(f"bad magic {lines[0]!r}")
    if first[1] != str(VERSION):
        raise FormatError(f"unsupported field format version {first[1]}")
    entries = {}
    for line in lines[1:]:
        key, _, rest = line.partition(" ")
        entries[key] = rest.split()
    try:
        dtype = entries["dtype"][0]
        dims = int(entries["dims"][0])
        points = tuple(int(v) for v in entries["points"])
        extents = tuple(float(v) for v in entries["extents"])
        time = float(entries["time"][0])
    except (KeyError, IndexError, ValueError) as exc:
        raise FormatError(f"incomplete or malformed header: {exc}") from None
    if dtype not in DTYPES:
        raise FormatError(f"unsupported dtype {dtype!r}")
    if len(points) != dims or len(extents) != dims:
        raise FormatError("dims does not match points/extents")
    return FieldHeader(dtype, dims, points, extents, time, end + 2)


def inspect_field(path) -> FieldHeader:
    """Read only the header of a field file."""
    with open(path, "rb") as fh:
        raw = fh.read(MAX_HEADER)
    return _parse_header(raw)


def read_field(path) -> Field:
    data = Path(path).read_bytes()
    header = _parse_header(data[:MAX_HEADER])
    payload = data[header.payload_offset:]
    if len(payload) != header.payload_bytes:
        raise FormatError(f"payload has {len(payload)} bytes, expected {header.payload_bytes}")
    try:
        grid = Grid(header.extents, header.points)
    except ValueError as exc:
        raise FormatError(f"invalid grid in header: {exc}") from None
    values = np.frombuffer(payload, dtype=DTYPES[header.dtype]).reshape(header.points)
    cls = ComplexField if header.dtype == "complex128" else RealField
    return cls(grid, values.astype(values.dtype.newbyteorder("=")), header.time)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trajectories(trajectories, path, limit: int | None = None) -> None:
    """One row per recorded position: member, kind, t, x[, y], exited."""
    with open(path, "w") as fh:
        dims = trajectories[0].positions.shape[1] if trajectories else 1
        axes = ["x", "y"][:dims]
        fh.write("# member kind t " + " ".join(axes) + " exited\n")
        for traj in trajectories[:limit] if limit else trajectories:
            flag = 1 if traj.exited else 0
            for t, pos in zip(traj.times, traj.positions):
                fh.write(f"{traj.member} {traj.kind} {_fmt(t)} " + " ".join(_fmt(p) for p in pos) + f" {flag}\n")


def read_trajectories(path):
    """Return a dict member -> (kind, times, positions, exited)."""
    out = {}
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            parts = line.split()
            member, kind, t = int(parts[0]), parts[1], float(parts[2])
            pos = [float(v) for v in parts[3:-1]]
            entry = out.setdefault(member, [kind, [], [], bool(int(parts[-1]))])
            entry[1].append(t)
            entry[2].append(pos)
    return {k: (v[0], np.array(v[1]), np.array(v[2]), v[3]) for k, v in out.items()}


def write_columns(path, header: str, columns) -> None:
    cols = [np.asarray(c, dtype=float) for c in columns]
    with open(path, "w") as fh:
        fh.write(f"# {header}\n")
        for row in zip(*cols):
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
