import numpy as np
import pytest

from madelab.errors import FormatError
from madelab.grid import ComplexField, RealField, make_grid
from madelab.io import (
    file_digest, inspect_field, read_field, read_trajectories, write_columns, write_field, write_trajectories,
)
from madelab.trajectories import Trajectory


@pytest.fixture
def field2d(rng):
    g = make_grid(2, [3.5, 7.0], [16, 32])
    return ComplexField(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape), time=0.125)


def test_round_trip_is_bit_exact(tmp_path, field2d, rng):
    p = tmp_path / "psi.madf"
    write_field(field2d, p)
    back = read_field(p)
    assert isinstance(back, ComplexField)
    assert back.grid == field2d.grid and back.time == 0.125
    assert back.values.tobytes() == field2d.values.tobytes()
    g = make_grid(1, [10.0], [64])
    real = RealField(g, rng.normal(size=64))
    write_field(real, tmp_path / "r.madf")
    assert np.array_equal(read_field(tmp_path / "r.madf").values, real.values)


def test_inspect_reads_header_only(tmp_path, field2d):
    p = tmp_path / "psi.madf"
    write_field(field2d, p)
    h = inspect_field(p)
    assert h.dtype == "complex128" and h.dims == 2
    assert tuple(h.points) == (16, 32) and tuple(h.extents) == (3.5, 7.0)
    assert h.payload_bytes == 16 * 32 * 16


def test_truncated_file_rejected(tmp_path, field2d):
    p = tmp_path / "psi.madf"
    write_field(field2d, p)
    data = p.read_bytes()
    p.write_bytes(data[:-8])
    with pytest.raises(FormatError):
        read_field(p)
    p.write_bytes(data[:20])
    with pytest.raises(FormatError):
        read_field(p)


def test_bad_magic_rejected(tmp_path):
    p = tmp_path / "x.madf"
    p.write_bytes(b"NOTAFIELD 1\n\n")
    with pytest.raises(FormatError):
        inspect_field(p)


def test_trajectory_text_round_trip(tmp_path):
    times = np.array([0.0, 0.5, 1.0])
    trajs = [
        Trajectory("bohm", times, np.array([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]]), False, None, 0),
        Trajectory("bohm", times, np.array([[1.0, 2.0]]), True, None, 1),
    ]
    p = tmp_path / "t.txt"
    write_trajectories(trajs, p)
    back = read_trajectories(p)
    assert back[0][0] == "bohm" and not back[0][3] and back[1][3]
    assert np.array_equal(back[0][2], trajs[0].positions)
    assert np.array_equal(back[1][1], [0.0])
    write_trajectories(trajs, p, limit=1)
    assert list(read_trajectories(p)) == [0]


def test_columns_and_digest(tmp_path):
    p = tmp_path / "c.txt"
    write_columns(p, "a b", [[1.0, 2.0], [3.0, 4.0]])
    assert p.read_text().splitlines() == ["# a b", "1.0 3.0", "2.0 4.0"]
    q = tmp_path / "d.txt"
    q.write_bytes(p.read_bytes())
    assert file_digest(p) == file_digest(q) and len(file_digest(p)) == 64
