import json

import pytest

from madelab.cli import main
from madelab.config import parse_config
from madelab.errors import ConfigError
from madelab.presets import PRESETS
from madelab.runner import run_scenario

SMALL = """\
[grid]
dims = 1
extents = 20.0
points = 128

[initial]
kind = gaussian
width = 1.0
momentum = 0.5

[solver]
dt = 0.01
total_time = 0.5
snapshot_stride = 5

[trajectories]
kind = bohm
count = {count}
seed = 3

[output]
directory = {out}
artifacts = psi, rho, vq, trajectories, diagnostics
field_every = 5
"""


def _write(tmp_path, count=50, name="cfg.ini"):
    out = tmp_path / "out"
    p = tmp_path / name
    p.write_text(SMALL.format(count=count, out=out))
    return p, out


def test_run_writes_artifacts_and_manifest(tmp_path):
    cfg_path, out = _write(tmp_path)
    assert main(["--quiet", "run", str(cfg_path)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["failed_stage"] is None
    assert (out / "trajectories.txt").exists() and (out / "diagnostics.json").exists()
    assert sorted(p.name for p in (out / "fields").iterdir())[:2] == ["psi_00000.madf", "psi_00005.madf"]
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["norm_drift"] < 1e-12


def test_zero_count_skips_trajectory_stage(tmp_path):
    cfg_path, out = _write(tmp_path, count=0)
    assert main(["--quiet", "run", str(cfg_path)]) == 0
    assert not (out / "trajectories.txt").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert "trajectories" not in manifest["stages"]


def test_invalid_config_creates_nothing(tmp_path, capsys):
    cfg_path, out = _write(tmp_path)
    cfg_path.write_text(cfg_path.read_text().replace("points = 128", "points = 100"))
    assert main(["run", str(cfg_path)]) == 1
    assert not out.exists()
    assert "points" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        run_scenario(parse_config(cfg_path.read_text(), check=False))
    assert not out.exists()


def test_missing_config_is_a_config_error(tmp_path):
    assert main(["--quiet", "validate", str(tmp_path / "missing.ini")]) == 1


def test_overrides_from_command_line(tmp_path):
    cfg_path, out = _write(tmp_path)
    other = tmp_path / "other"
    assert main(["--quiet", "run", str(cfg_path), "--output-dir", str(other), "--seed", "11", "--threads", "2"]) == 0
    manifest = json.loads((other / "manifest.json").read_text())
    assert manifest["seeds"]["trajectories"] == 11
    assert not out.exists()
    assert main(["--quiet", "run", str(cfg_path), "--threads", "0"]) == 1


def test_validate_prints_canonical_form(tmp_path, capsys):
    cfg_path, _ = _write(tmp_path)
    assert main(["validate", str(cfg_path)]) == 0
    text = capsys.readouterr().out
    assert parse_config(text) == parse_config(cfg_path.read_text())


def test_inspect_and_format_errors(tmp_path, capsys):
    cfg_path, out = _write(tmp_path)
    main(["--quiet", "run", str(cfg_path)])
    capsys.readouterr()
    field = out / "fields" / "psi_00000.madf"
    assert main(["inspect", str(field)]) == 0
    assert "complex128" in capsys.readouterr().out
    field.write_bytes(field.read_bytes()[:10])
    assert main(["inspect", str(field)]) == 3
    assert main(["inspect", str(tmp_path / "nope.madf")]) == 3


def test_presets_listing(capsys):
    assert main(["presets"]) == 0
    assert capsys.readouterr().out.split() == list(PRESETS)
    assert main(["presets", "vortex"]) == 0
    assert "[initial]" in capsys.readouterr().out
    assert main(["presets", "nope"]) == 1


def test_runs_are_reproducible(tmp_path):
    cfg_path, _ = _write(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["--quiet", "run", str(cfg_path), "--output-dir", str(a)])
    main(["--quiet", "run", str(cfg_path), "--output-dir", str(b), "--threads", "3"])
    for name in ("trajectories.txt", "diagnostics.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    assert str(a) in json.dumps(ma) and str(b) in json.dumps(mb)
    assert json.dumps(ma).replace(str(a), "") == json.dumps(mb).replace(str(b), "")
