import math

import numpy as np
import pytest

from oracles import free_gaussian_width
from polariton_bloch import continuum as co
from polariton_bloch.band_structure import KronigPenneySpec, compute_bands
from polariton_bloch.eit_params import rb87_preset
from polariton_bloch.errors import LatticeTruncationError, StepSizeError


@pytest.fixture(scope="module")
def rb_spec():
    return rb87_preset()[2]


def toy_spec(V0=20.0):
    # unit lattice constant and mass; recoil (pi)^2/2 ~ 4.93
    return KronigPenneySpec.from_fraction(1.0, 0.5, V0, 1.0)


def test_potential_periodic_and_zero_in_wells(rb_spec):
    d = rb_spec.d
    x = np.linspace(-50 * d, 50 * d, 10001)
    assert np.array_equal(co.sample_potential(rb_spec, 0.0, x), co.sample_potential(rb_spec, 0.0, x + d))
    well_centers = -0.5 * rb_spec.b + d * np.arange(-5, 6)
    assert np.all(co.sample_potential(rb_spec, 0.0, well_centers) == 0)
    assert np.all(co.sample_potential(rb_spec, 0.0, 0.5 * rb_spec.a + d * np.arange(-5, 6)) == rb_spec.V0)


def test_potential_tilt(rb_spec):
    x = np.array([-0.5 * rb_spec.b, 3.1e-4])
    V = co.sample_potential(rb_spec, 2.0, x)
    assert V[0] == 2.0 * x[0]


@pytest.mark.parametrize("ppc", [16, 50, 256])
def test_barrier_fraction_counting(rb_spec, ppc):
    dx = rb_spec.d / ppc
    x = -37 * rb_spec.d + dx * np.arange(64 * ppc)
    frac = np.mean(co.sample_potential(rb_spec, 0.0, x) == rb_spec.V0)
    assert abs(frac - rb_spec.a / rb_spec.d) <= 1 / ppc


def test_grid_state_requires_power_of_two():
    with pytest.raises(ValueError):
        co.GridState(0.0, 1.0, np.ones(100))


def test_free_gaussian_law():
    m, sigma = 7.9e5, 1e-4
    run = co.free_component_run(sigma, 0.02, m, 10.0, samples=21)
    law = free_gaussian_width(sigma, run.times, m)
    assert np.max(np.abs(run.width / law - 1)) <= 1e-4
    assert np.max(np.abs(run.center)) <= 1e-9
    assert run.width[-1] / sigma > 1.5  # the law is tested well away from t = 0


def test_linear_potential_ehrenfest():
    m, sigma, F, t = 1.0, 1.0, 1.0, 4.0
    n, dx = 1024, 0.125
    state = co.gaussian_state(-0.5 * n * dx, dx, n, sigma)
    out = co.evolve_grid(state, F * state.x, t, None, m)
    expected = -F * t**2 / (2 * m)
    assert out.moments()[0] == pytest.approx(expected, rel=1e-4)


def _toy_state(spec, n_cells=64, ppc=16, sigma=4.0):
    x_min = -0.5 * n_cells * spec.d
    return co.ground_band_packet(spec, x_min, ppc, n_cells * ppc, sigma)


def test_time_reversal():
    spec = toy_spec()
    s0 = _toy_state(spec)
    V = co.sample_potential(spec, 0.5, s0.x)
    fwd = co.evolve_grid(s0, V, 0.5, None, spec.m_eff, spec.a)
    back = co.evolve_grid(fwd, V, -0.5, None, spec.m_eff, spec.a)
    assert np.max(np.abs(back.psi - s0.psi)) <= 1e-7
    assert back.t == pytest.approx(0.0, abs=1e-12)


def test_second_order_convergence():
    spec = toy_spec()
    s0 = _toy_state(spec)
    V = co.sample_potential(spec, 0.5, s0.x)
    t = 0.05
    dt0 = co.max_grid_dt(V, s0.dx, spec.m_eff)
    ref = co.evolve_grid(s0, V, t, dt0 / 16, spec.m_eff).psi
    e1 = np.max(np.abs(co.evolve_grid(s0, V, t, dt0, spec.m_eff).psi - ref))
    e2 = np.max(np.abs(co.evolve_grid(s0, V, t, dt0 / 2, spec.m_eff).psi - ref))
    assert e1 / e2 >= 3.5


def test_norm_conservation():
    spec = toy_spec()
    s0 = _toy_state(spec)
    V = co.sample_potential(spec, 0.5, s0.x)
    out = co.evolve_grid(s0, V, 1.0, None, spec.m_eff, spec.a)
    assert abs(out.norm - 1) <= 1e-9


def test_budget_violations_suggest_fix():
    spec = toy_spec()
    s0 = _toy_state(spec)
    V = co.sample_potential(spec, 0.5, s0.x)
    limit = co.max_grid_dt(V, s0.dx, spec.m_eff)
    with pytest.raises(StepSizeError) as info:
        co.evolve_grid(s0, V, 1.0, 2 * limit, spec.m_eff)
    assert info.value.suggested == pytest.approx(limit)
    coarse = co.gaussian_state(-32.0, 0.125, 512, 4.0)
    with pytest.raises(StepSizeError) as info:
        co.evolve_grid(coarse, co.sample_potential(spec, 0.0, coarse.x), 0.1, None, 1.0, barrier_width=0.5)
    assert info.value.suggested == pytest.approx(0.5 / 8)


def test_edge_guard():
    state = co.gaussian_state(-8.0, 1 / 16, 256, 1.0, center=6.0)
    with pytest.raises(LatticeTruncationError):
        co.evolve_grid(state, np.zeros(256), 0.01, None, 1.0)


def test_grid_bands_free_limit():
    spec = KronigPenneySpec.from_fraction(1.0, 0.5, 1e-9, 1.0)
    E_R = spec.recoil
    bs = co.grid_band_edges(spec, 33, points_per_cell=64)
    assert bs.bands[0][0] == pytest.approx(0.0, abs=1e-6)
    assert bs.bands[0][1] == pytest.approx(E_R, rel=1e-6)
    assert bs.bands[1][1] == pytest.approx(4 * E_R, rel=1e-6)


def test_grid_bands_match_solver(rb_spec):
    ref = compute_bands(rb_spec, 2)
    grid = co.grid_band_edges(rb_spec, 33)
    assert grid.Delta == pytest.approx(ref.Delta, rel=1e-3)
    assert grid.E_gap == pytest.approx(ref.E_gap, rel=1e-3)
    # monotone ground band: the zone centre and edge already give the extrema
    edges_only = co.grid_band_edges(rb_spec, 2)
    assert edges_only.Delta == pytest.approx(grid.Delta, rel=1e-12)


def test_dressed_packet_alignment(rb_spec):
    with pytest.raises(ValueError):
        co.ground_band_packet(rb_spec, 0.5 * rb_spec.d, 16, 1024, 1e-4)


def test_free_component_examples():
    _, fields, _ = rb87_preset()
    m = fields.m_eff
    v_g = fields.k_probe / m
    run = co.free_component_run(1e-4, 1e-3, m, v_g, samples=11)
    assert np.max(np.abs(run.center)) <= 1e-9
    assert run.extra["z_center"][-1] == pytest.approx(10e-3, rel=1e-3)
    assert np.array_equal(run.extra["z_center"], v_g * run.times)


def test_peak_times_parabolic():
    t = np.linspace(0, 2.3, 231)
    peaks = co.peak_times(t, np.cos(2 * math.pi * t))
    assert peaks[0] == 0.0
    assert np.allclose(peaks[1:], [1.0, 2.0], atol=1e-4)


def test_free_component_grid_shape():
    times = np.linspace(0, 1e-3, 5)
    x = 8e-6 * np.arange(-150, 151)
    rho = co.free_component_grid(1e-4, times, 7.9e5, x)
    assert rho.shape == (5, 301)
    assert np.sum(rho[0]) * 8e-6 == pytest.approx(1.0, rel=1e-6)
