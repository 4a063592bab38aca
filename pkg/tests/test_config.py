import pytest

from madelab.config import ScenarioConfig, canonicalize, parse_config, validate
from madelab.errors import ConfigError
from madelab.presets import PRESETS, load_preset, preset_text

MINIMAL = """\
[grid]
dims = 1
extents = 20.0
points = 128
"""


def test_defaults_fill_missing_sections():
    cfg = parse_config(MINIMAL)
    assert cfg.grid.points == (128,)
    assert cfg.potential.kind == "free"
    assert cfg.trajectories.count == 0
    assert cfg.diagnostics.rho_floor == 1e-12
    assert cfg.units.hbar == 1.0 and cfg.units.mass == 1.0


def test_canonical_form_round_trips():
    for name in PRESETS:
        cfg = load_preset(name)
        text = canonicalize(cfg)
        assert parse_config(text) == cfg
        assert canonicalize(parse_config(text)) == text


@pytest.mark.parametrize("text, where", [
    (MINIMAL.replace("points = 128", "points = 100"), "points"),
    (MINIMAL + "[solver]\ndt = 0.3\ntotal_time = 1.0\n", "total_time"),
    (MINIMAL + "[solver]\ndt = 0.01\ntotal_time = 1.0\nsnapshot_stride = 7\n", "snapshot_stride"),
    (MINIMAL + "[initial]\nkind = squeezed\n", "kind"),
    (MINIMAL + "[initial]\nwidth = -1\n", "initial"),
    (MINIMAL + "[grid]\n", "malformed"),
    (MINIMAL + "[trajectories]\ncount = -5\n", "count"),
    (MINIMAL + "[output]\nartifacts = psi, movie\n", "artifacts"),
    (MINIMAL.replace("extents = 20.0", "extents = nan"), "extents"),
])
def test_invalid_configs_name_the_problem(text, where):
    with pytest.raises(ConfigError, match=where):
        parse_config(text)


def test_unknown_key_and_section():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(MINIMAL + "colour = blue\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(MINIMAL + "[plots]\nstyle = dark\n")


def test_check_false_defers_validation():
    cfg = parse_config(MINIMAL.replace("points = 128", "points = 100"), check=False)
    assert cfg.grid.points == (100,)
    with pytest.raises(ConfigError):
        validate(cfg)


def test_overrides():
    cfg = load_preset("free_gaussian").with_overrides(seed=99, directory="elsewhere")
    assert cfg.trajectories.seed == 99 and cfg.output.directory == "elsewhere"
    assert load_preset("free_gaussian").with_overrides() == load_preset("free_gaussian")


def test_presets_are_valid():
    for name in PRESETS:
        assert isinstance(load_preset(name), ScenarioConfig)
        assert preset_text(name).startswith("#")
    with pytest.raises(ConfigError):
        preset_text("nope")
