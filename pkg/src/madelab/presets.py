"""Built-in scenarios.

Parameter values are illustrative defaults chosen so that each scenario is
well resolved and stays clear of the periodic boundaries; they are not
taken from any experiment.
"""
from __future__ import annotations

from .config import ScenarioConfig, parse_config
from .errors import ConfigError

FREE_GAUSSIAN = """\
# Free minimum-uncertainty packet, sigma0 = 1
[grid]
dims = 1
extents = 40.0
points = 1024

[initial]
kind = gaussian
width = 1.0

[solver]
dt = 0.001
total_time = 2.0
snapshot_stride = 10

[trajectories]
kind = bohm
count = 10000
seed = 7

[output]
directory = runs/free_gaussian
"""

HARMONIC_GROUND = """\
# Ground state of a unit harmonic trap, followed for one period
[grid]
dims = 1
extents = 20.0
points = 64

[potential]
kind = harmonic
omega = 1.0

[initial]
kind = harmonic_ground
omega = 1.0
refine = true

[solver]
dt = 0.00015707963267948966
total_time = 6.283185307179586
snapshot_stride = 400

[trajectories]
kind = bohm
count = 1000
seed = 3

[output]
directory = runs/harmonic_ground
"""

HARMONIC_COHERENT = """\
# Displaced ground state oscillating in a unit harmonic trap
[grid]
dims = 1
extents = 20.0
points = 256

[potential]
kind = harmonic
omega = 1.0

[initial]
kind = harmonic_coherent
omega = 1.0
displacement = 1.0

[solver]
dt = 0.0006283185307179586
total_time = 6.283185307179586
snapshot_stride = 100

[trajectories]
kind = bohm
count = 1000
seed = 5

[output]
directory = runs/harmonic_coherent
"""

PLANE_WAVE = """\
# Plane wave with five wavelengths across the box
[grid]
dims = 1
extents = 20.0
points = 256

[initial]
kind = plane_wave
momentum = 1.5707963267948966

[solver]
dt = 0.001
total_time = 1.0
snapshot_stride = 10

[trajectories]
kind = bohm
count = 100
seed = 11

[output]
directory = runs/plane_wave
"""

VORTEX = """\
# Singly quantized vortex in a Gaussian envelope
[grid]
dims = 2
extents = 20.0, 20.0
points = 256, 256

[initial]
kind = vortex
width = 1.25
winding = 1

[solver]
dt = 0.001
total_time = 0.1
snapshot_stride = 10

[trajectories]
kind = bohm
count = 1000
seed = 13

[diagnostics]
loop = -0.625, 0.625, -0.625, 0.625

[output]
directory = runs/vortex
"""

DOUBLE_SLIT = """\
# Two Gaussian slits 10 apart, packet moving along +x
[grid]
dims = 2
extents = 128.0, 64.0
points = 256, 256

[initial]
kind = two_gaussian_slits
center = -10.0, 0.0
momentum = 4.0, 0.0
separation = 10.0
slit_width = 0.5
longitudinal_width = 2.0
phase = 0.0

[solver]
dt = 0.005
total_time = 4.0
snapshot_stride = 8

[trajectories]
kind = bohm
count = 10000
seed = 1
substeps = 4

[diagnostics]
screen = 6.0
streamline_seeds = 17
streamline_line = -10.0, -8.0, 8.0

[output]
directory = runs/double_slit
"""

PRESETS = {
    "free_gaussian": FREE_GAUSSIAN,
    "harmonic_ground": HARMONIC_GROUND,
    "harmonic_coherent": HARMONIC_COHERENT,
    "plane_wave": PLANE_WAVE,
    "vortex": VORTEX,
    "double_slit": DOUBLE_SLIT,
}


def preset_text(name: str) -> str:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None


def load_preset(name: str) -> ScenarioConfig:
    return parse_config(preset_text(name))
