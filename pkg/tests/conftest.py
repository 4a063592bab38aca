import numpy as np
import pytest

from madelab.grid import make_grid
from madelab.presets import load_preset
from madelab.tdse import (
    InitialStateSpec,
    PotentialSpec,
    Units,
    build_initial_state,
    build_potential,
    evolve,
    stationary_filter,
)

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


def free_gaussian_exact(x, t, sigma0=1.0, hbar=1.0, m=1.0):
    a = 1 + 1j * hbar * t / (2 * m * sigma0**2)
    return (2 * np.pi * sigma0**2) ** -0.25 / np.sqrt(a) * np.exp(-x**2 / (4 * sigma0**2 * a))


def free_sigma(t, sigma0=1.0, hbar=1.0, m=1.0):
    return sigma0 * np.sqrt(1 + (hbar * t / (2 * m * sigma0**2)) ** 2)


def preset_timeline(name, **solver):
    cfg = load_preset(name)
    grid = cfg.grid.build()
    pot = build_potential(cfg.potential, grid, cfg.units)
    psi0 = build_initial_state(cfg.initial, grid, cfg.units)
    dt = solver.get("dt", cfg.solver.dt)
    if cfg.initial.refine:
        psi0 = stationary_filter(psi0, pot, dt, 2 * np.pi / cfg.potential.omega, cfg.units)
    return evolve(psi0, pot, solver.get("total_time", cfg.solver.total_time), dt,
                  solver.get("snapshot_stride", cfg.solver.snapshot_stride), cfg.units), cfg


@pytest.fixture(scope="session")
def free_timeline():
    """Free Gaussian preset: sigma0 = 1, L = 40, N = 1024, dt = 1e-3, to t = 2 every 10 steps."""
    return preset_timeline("free_gaussian")[0]


@pytest.fixture(scope="session")
def ground_timeline():
    return preset_timeline("harmonic_ground")[0]


@pytest.fixture(scope="session")
def double_slit():
    tl, cfg = preset_timeline("double_slit")
    return tl, cfg


@pytest.fixture(scope="session")
def small_free_2d():
    g = make_grid(2, [24.0, 24.0], [64, 64])
    psi = build_initial_state(InitialStateSpec("gaussian", width=(1.0,)), g)
    return evolve(psi, build_potential(PotentialSpec("free"), g), 1.0, 0.01, 10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def units():
    return Units()
