import math

import numpy as np
import pytest

from madelab.errors import ConfigError
from madelab.grid import inner_product, make_grid, norm
from madelab.tdse import (
    InitialStateSpec, PotentialSpec, Propagator, Units, build_initial_state, build_potential, energy,
    evolve, split_step, stability_limit, stationary_filter,
)
from conftest import free_gaussian_exact, free_sigma


def _free(grid):
    return build_potential(PotentialSpec("free"), grid)


def test_initial_states_are_normalized():
    g2 = make_grid(2, [20.0, 20.0], [64, 64])
    g1 = make_grid(1, [20.0], [128])
    specs = [
        (InitialStateSpec("gaussian", width=(1.5,), momentum=(2.0,)), g1),
        (InitialStateSpec("harmonic_coherent", omega=1.0, displacement=(1.0,)), g1),
        (InitialStateSpec("two_gaussian_slits", separation=4.0, slit_width=0.5), g2),
        (InitialStateSpec("vortex", winding=2), g2),
    ]
    for spec, g in specs:
        assert abs(norm(build_initial_state(spec, g)) - 1) < 1e-12


def test_plane_wave_off_grid_rejected():
    g = make_grid(1, [20.0], [64])
    with pytest.raises(ConfigError):
        build_initial_state(InitialStateSpec("plane_wave", momentum=(1.0,)), g)


def test_plane_wave_acquires_kinetic_phase():
    g = make_grid(1, [20.0], [64])
    k = 2 * np.pi * 3 / 20
    psi = build_initial_state(InitialStateSpec("plane_wave", momentum=(k,)), g)
    tl = evolve(psi, _free(g), 1.0, 0.01, 100)
    expected = psi.values * np.exp(-1j * k**2 / 2 * 1.0)
    assert np.max(np.abs(tl.psi[-1] - expected)) < 1e-12


def test_unitarity_in_harmonic_trap():
    g = make_grid(1, [20.0], [128])
    psi = build_initial_state(InitialStateSpec("gaussian", center=(1.0,), width=(0.5,)), g)
    pot = build_potential(PotentialSpec("harmonic", omega=1.0), g)
    tl = evolve(psi, pot, 2.0, 0.002, 50)
    assert np.max(np.abs(tl.norms() - 1)) < 1e-12


def test_free_gaussian_width_follows_spreading_law():
    g = make_grid(1, [40.0], [512])
    psi = build_initial_state(InitialStateSpec("gaussian", width=(1.0,)), g)
    tl = evolve(psi, _free(g), 2.0, 0.005, 100)
    x = g.axes[0]
    for t, p in zip(tl.times, tl.psi):
        rho = np.abs(p) ** 2 * g.spacing[0]
        assert abs(math.sqrt(np.sum(rho * x**2)) - free_sigma(t)) < 1e-9


def test_free_gaussian_matches_exact_solution():
    g = make_grid(1, [40.0], [512])
    psi = build_initial_state(InitialStateSpec("gaussian", width=(1.0,)), g)
    tl = evolve(psi, _free(g), 1.0, 0.01, 100)
    assert np.max(np.abs(tl.psi[-1] - free_gaussian_exact(g.axes[0], 1.0))) < 1e-10


def test_coherent_state_oscillates():
    g = make_grid(1, [20.0], [128])
    psi = build_initial_state(InitialStateSpec("harmonic_coherent", omega=1.0, displacement=(1.5,)), g)
    pot = build_potential(PotentialSpec("harmonic", omega=1.0), g)
    tl = evolve(psi, pot, math.pi, math.pi / 2000, 100)
    x = g.axes[0]
    mean = np.array([np.sum(np.abs(p) ** 2 * x) * g.spacing[0] for p in tl.psi])
    assert np.max(np.abs(mean - 1.5 * np.cos(tl.times))) < 1e-5


def test_second_order_convergence():
    g = make_grid(1, [20.0], [128])
    psi = build_initial_state(InitialStateSpec("harmonic_coherent", omega=1.0, displacement=(1.0,)), g)
    pot = build_potential(PotentialSpec("harmonic", omega=1.0), g)
    ref = evolve(psi, pot, 1.0, 1e-4, 10000).psi[-1]
    errs = [norm(type(psi)(g, evolve(psi, pot, 1.0, dt, 1).psi[-1] - ref)) for dt in (0.02, 0.01)]
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_energy_conserved():
    g = make_grid(1, [20.0], [128])
    psi = build_initial_state(InitialStateSpec("gaussian", center=(1.0,), width=(0.8,), momentum=(0.5,)), g)
    pot = build_potential(PotentialSpec("harmonic", omega=1.0), g)
    tl = evolve(psi, pot, 2.0, 1e-3, 500)
    e = [energy(tl.snapshot(i), pot) for i in range(len(tl))]
    assert np.ptp(e) < 1e-6


def test_ground_state_energy():
    g = make_grid(1, [20.0], [128])
    psi = build_initial_state(InitialStateSpec("harmonic_ground", omega=2.0), g)
    pot = build_potential(PotentialSpec("harmonic", omega=2.0), g)
    assert abs(energy(psi, pot) - 1.0) < 1e-10


def test_time_reversal():
    g = make_grid(1, [20.0], [128])
    psi = build_initial_state(InitialStateSpec("gaussian", width=(1.0,), momentum=(1.0,)), g)
    pot = build_potential(PotentialSpec("harmonic", omega=1.0), g)
    prop = Propagator(pot, 0.01)
    fwd = prop.steps(np.array(psi.values), 200)
    # a real potential makes conjugation reverse time
    back = np.conj(prop.steps(np.conj(fwd), 200))
    assert np.max(np.abs(back - psi.values)) < 1e-12


def test_split_step_matches_propagator():
    g = make_grid(1, [20.0], [64])
    psi = build_initial_state(InitialStateSpec("gaussian"), g)
    pot = _free(g)
    one = split_step(psi, pot, 0.01)
    assert np.allclose(one.values, Propagator(pot, 0.01).step(np.array(psi.values)))
    assert math.isclose(one.time, psi.time + 0.01)


def test_zero_total_time_returns_initial_snapshot():
    g = make_grid(1, [20.0], [64])
    psi = build_initial_state(InitialStateSpec("gaussian"), g)
    tl = evolve(psi, _free(g), 0.0, 0.01, 1)
    assert len(tl) == 1 and np.array_equal(tl.psi[0], psi.values)


def test_incommensurate_time_rejected():
    g = make_grid(1, [20.0], [64])
    psi = build_initial_state(InitialStateSpec("gaussian"), g)
    with pytest.raises(ConfigError):
        evolve(psi, _free(g), 1.0, 0.3, 1)
    with pytest.raises(ConfigError):
        evolve(psi, _free(g), 1.0, 0.1, 3)


def test_large_dt_warns():
    g = make_grid(1, [20.0], [256])
    psi = build_initial_state(InitialStateSpec("gaussian"), g)
    dt = 4 * stability_limit(g)
    tl = evolve(psi, _free(g), 10 * dt, dt, 10)
    assert tl.warnings


def test_stationary_filter_removes_discretization_drift():
    g = make_grid(1, [20.0], [64])
    pot = build_potential(PotentialSpec("harmonic", omega=1.0), g)
    psi = build_initial_state(InitialStateSpec("harmonic_ground", omega=1.0), g)
    dt = 2 * np.pi / 2000
    refined = stationary_filter(psi, pot, dt, 2 * np.pi)
    assert abs(norm(refined) - 1) < 1e-12
    assert abs(abs(inner_product(refined, psi)) - 1) < 1e-5
    out = Propagator(pot, dt).steps(np.array(refined.values), 500)
    overlap = abs(np.vdot(refined.values, out)) * g.spacing[0]
    assert 1 - overlap < 1e-12


def test_units_scale_dispersion():
    g = make_grid(1, [40.0], [512])
    units = Units(hbar=0.5, mass=2.0)
    psi = build_initial_state(InitialStateSpec("gaussian", width=(1.0,)), g, units)
    tl = evolve(psi, _free(g), 1.0, 0.01, 100, units)
    x = g.axes[0]
    width = math.sqrt(np.sum(np.abs(tl.psi[-1]) ** 2 * x**2) * g.spacing[0])
    assert abs(width - free_sigma(1.0, hbar=0.5, m=2.0)) < 1e-9
