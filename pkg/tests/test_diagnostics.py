import math

import numpy as np
import pytest

from madelab.diagnostics import (
    binned_density, canyon_report, dispersion_report, ensemble_histogram, equivariance_distance,
    fringe_profile, local_extrema, streamline_map, tv_distance,
)
from madelab.errors import ConfigError, UnreliableStatisticsError
from madelab.grid import RealField, make_grid
from madelab.tdse import InitialStateSpec, PotentialSpec, build_initial_state, build_potential, evolve
from madelab.trajectories import run_ensemble
from conftest import free_sigma


def test_tv_distance_properties(rng):
    p = rng.random(50)
    q = rng.random(50)
    assert tv_distance(p, p) == 0.0
    assert math.isclose(tv_distance(p, q), tv_distance(q, p))
    assert 0.0 <= tv_distance(p, q) <= 1.0
    a = np.zeros(4)
    b = np.zeros(4)
    a[0] = b[3] = 1.0
    assert tv_distance(a, b) == 1.0
    with pytest.raises(ConfigError):
        tv_distance(np.ones(3), np.ones(4))


def test_local_extrema_refines_peak():
    y = np.linspace(-3, 3, 61)
    f = np.exp(-(y - 0.123) ** 2)
    peaks, values = local_extrema(f, y, "max")
    assert len(peaks) == 1 and abs(peaks[0] - 0.123) < 1e-3


def test_binned_density_and_histogram_agree():
    g = make_grid(1, [20.0], [256])
    psi = build_initial_state(InitialStateSpec("gaussian", width=(1.5,)), g)
    target = binned_density(RealField(g, np.abs(psi.values) ** 2))
    assert math.isclose(target.sum(), 1.0)
    samples = np.random.default_rng(0).normal(0.0, 1.5, size=(200000, 1))
    hist = ensemble_histogram(samples, g)
    assert tv_distance(hist, target) < 0.01


def test_single_member_has_large_distance(free_timeline):
    ens = run_ensemble(free_timeline, 1, "bohm", seed=1)
    pos, _ = ens.positions_at(-1)
    target = binned_density(RealField(free_timeline.grid, np.abs(free_timeline.psi[-1]) ** 2))
    occupied = np.argmax(ensemble_histogram(pos, free_timeline.grid))
    # a lone member fills one bin, so the distance is the mass outside it
    assert math.isclose(equivariance_distance(free_timeline, ens, -1).distance, 1 - target[occupied])
    assert equivariance_distance(free_timeline, ens, -1).distance > 0.8


def test_too_many_exits_flagged():
    g = make_grid(1, [20.0], [128])
    psi = build_initial_state(InitialStateSpec("gaussian", width=(1.0,), momentum=(8.0,)), g)
    tl = evolve(psi, build_potential(PotentialSpec("free"), g), 1.2, 0.001, 50)
    ens = run_ensemble(tl, 200, "bohm", seed=3)
    with pytest.raises(UnreliableStatisticsError):
        equivariance_distance(tl, ens, -1)


def test_dispersion_of_free_packet(free_timeline):
    rep = dispersion_report(free_timeline)
    assert np.allclose(rep.dx[:, 0], free_sigma(rep.times), atol=1e-9)
    assert np.allclose(rep.dp_quantum[:, 0], 0.5, atol=1e-9)
    assert np.all(rep.product_quantum >= 0.5 - 1e-9)
    assert np.all(np.isnan(rep.dp_bohm))


def test_bohm_momentum_spread_grows_from_zero(free_timeline):
    ens = run_ensemble(free_timeline, 5000, "bohm", seed=8)
    rep = dispersion_report(free_timeline, ens)
    # v = x t / (4 sigma^2 + t^2) in free flight with sigma0 = 1
    t = rep.times
    expected = t / (4 + t**2) * rep.dx[:, 0]
    assert rep.dp_bohm[0, 0] < 1e-12
    assert np.allclose(rep.dp_bohm[:, 0], expected, rtol=0.03, atol=1e-9)


def _slits(phase, total=1.5):
    g = make_grid(2, [64.0, 32.0], [128, 128])
    spec = InitialStateSpec("two_gaussian_slits", center=(-6.0, 0.0), momentum=(4.0, 0.0), separation=6.0,
                            slit_width=0.5, longitudinal_width=1.5, phase=phase)
    psi = build_initial_state(spec, g)
    return evolve(psi, build_potential(PotentialSpec("free"), g), total, 0.005, 30)


def test_opposite_phase_gives_central_minimum():
    tl = _slits(math.pi)
    prof = fringe_profile(tl, 0.0, 6.0)
    centre = prof.density[np.argmin(np.abs(prof.coords))]
    assert centre < 1e-6 * prof.density.max()
    assert np.min(np.abs(prof.minima)) < 0.1
    rep = canyon_report(tl, 0.0)
    assert rep.counts_match and np.min(np.abs(rep.canyon_minima)) < 0.1


def test_in_phase_fringe_spacing_and_canyons():
    tl = _slits(0.0)
    prof = fringe_profile(tl, 0.0, 6.0)
    assert np.min(np.abs(prof.maxima)) < 0.1
    assert prof.relative_deviation < 0.1
    rep = canyon_report(tl, 0.0)
    assert rep.counts_match and rep.max_offset <= 2 * rep.spacing


def test_single_gaussian_has_no_canyons():
    g = make_grid(2, [64.0, 32.0], [128, 128])
    psi = build_initial_state(InitialStateSpec("gaussian", center=(-6.0, 0.0), width=(1.5,), momentum=(4.0, 0.0)), g)
    tl = evolve(psi, build_potential(PotentialSpec("free"), g), 1.5, 0.005, 30)
    rep = canyon_report(tl, 0.0)
    assert len(rep.density_minima) == 0 and len(rep.canyon_minima) == 0
    with pytest.warns(UserWarning):
        prof = fringe_profile(tl, 0.0, 6.0)
    assert math.isnan(prof.spacing)


def test_screen_outside_domain_rejected():
    tl = _slits(0.0, total=0.15)
    with pytest.raises(ConfigError):
        fringe_profile(tl, 40.0, 6.0)


def test_free_streamlines_do_not_undulate(small_free_2d):
    sm = streamline_map(small_free_2d, (0.0, -2.0, 2.0, 9))
    assert sm.undulations == [0] * 9
    ys = [t.positions[-1, 1] for t in sm.trajectories]
    assert np.all(np.diff(ys) > 0)


def test_slit_streamlines_undulate():
    tl = _slits(0.0)
    sm = streamline_map(tl, (-6.0, -4.0, 4.0, 9))
    assert max(sm.undulations) >= 1
    # streamlines never cross the symmetry axis
    for t in sm.trajectories:
        y = t.positions[:, 1]
        assert np.all(np.sign(y[np.abs(y) > 1e-9]) == np.sign(y[0])) or abs(y[0]) < 1e-9
