import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from floquet_rd.asymptotics import (
    PhaseField, compare_profile, extract_phase, gaussian, measure_decay, predicted_alpha_star,
    profile_grid, tube_radius, write_asymptotics_csv, analyze_snapshots,
)
from floquet_rd.errors import EmptyWindow, OutOfTube, UnderResolved
from floquet_rd.floquet import adjoint_solution
from floquet_rd.simulate import FieldState, Grid, PerturbationSpec


@pytest.fixture(scope="module")
def tilted(tilted_case):
    model, D, orbit = tilted_case
    return model, D, orbit, adjoint_solution(model, orbit)


@given(st.floats(0.01, 3.0), st.floats(1e-3, 1e3))
def test_decay_fit_exact_power(p, c):
    t = np.linspace(10, 400, 50)
    fit = measure_decay(t, c * (1 + t) ** (-p), (10, 400))
    assert abs(fit.exponent - p) < 1e-12
    assert fit.prefactor == pytest.approx(c, rel=1e-10)


def test_decay_fit_window_checks():
    t = np.linspace(0, 100, 101)
    with pytest.raises(EmptyWindow):
        measure_decay(t, np.ones_like(t), (50, 55))
    y = np.ones_like(t)
    y[60] = 0.0
    with pytest.raises(EmptyWindow):
        measure_decay(t, y, (50, 80))


def _state(orbit, model, grid, v, t=0.0, t0=0.0):
    base = orbit.at(t0 + t).reshape((-1,) + (1,) * grid.n)
    return FieldState(t, base + v, grid, model, t0)


def test_tangent_perturbation(tilted):
    model, _, orbit, adj = tilted
    g = Grid(1, 10.0, 32)
    t = 1.7
    v = 0.01 * orbit.derivative_at(t)[:, None] * np.ones(32)
    ph = extract_phase(_state(orbit, model, g, v, t), orbit, adj)
    assert np.allclose(ph.values, 0.01, atol=1e-10)
    assert np.allclose(ph.beta, 0.0, atol=1e-10)


def test_orthogonal_perturbation(tilted):
    model, _, orbit, adj = tilted
    g = Grid(1, 10.0, 32)
    U = adj.at(0.4)
    w = np.array([-U[1], U[0]]) / np.linalg.norm(U)
    v = 0.01 * w[:, None] * np.exp(-g.x**2)
    ph = extract_phase(_state(orbit, model, g, v, 0.4), orbit, adj)
    assert np.allclose(ph.values, 0.0, atol=1e-14)


def test_tube_guard(tilted):
    model, _, orbit, adj = tilted
    r = tube_radius(orbit)
    # circle of radius eps: min speed eps, curvature 1/eps
    assert r == pytest.approx(0.2 * 0.25, rel=1e-6)
    g = Grid(1, 10.0, 32)
    v = np.zeros((2, 32))
    v[1, 3] = 2 * r
    with pytest.raises(OutOfTube):
        extract_phase(_state(orbit, model, g, v), orbit, adj)


def test_alpha_star_closed_form(tilted):
    # t0 at the phase where u_* = eps (1, 0): (U_*, (0,1)) = 1/eps
    model, _, orbit, adj = tilted
    t0 = (-math.atan2(orbit.u0[1], orbit.u0[0])) % orbit.period
    g = Grid(1, 200.0, 2048)
    pert = PerturbationSpec(amplitude=1e-2, width=2.0, direction=(0.0, 1.0))
    a, band = predicted_alpha_star(pert, orbit, adj, t0, g)
    assert a == pytest.approx(1e-2 * 2.0 * math.sqrt(2 * math.pi) / 0.5, rel=1e-8)
    assert 0 < band < 0.1 * a


def test_alpha_star_tangent_and_kernel(tilted):
    model, _, orbit, adj = tilted
    g = Grid(1, 100.0, 1024)
    t0 = 0.9
    du = orbit.derivative_at(t0)
    sigma = 2.0
    # direction is normalised, so (U, w) = 1 / |u'|
    amp = 1e-2 * np.linalg.norm(du) / (sigma * math.sqrt(2 * math.pi))
    pert = PerturbationSpec(amplitude=amp, width=sigma, direction=tuple(du))
    a, _ = predicted_alpha_star(pert, orbit, adj, t0, g)
    assert a == pytest.approx(1e-2, rel=1e-10)
    U = adj.at(t0)
    pert = PerturbationSpec(amplitude=1e-2, width=sigma, direction=(-U[1], U[0]))
    a, _ = predicted_alpha_star(pert, orbit, adj, t0, g)
    assert abs(a) < 1e-15


def _mass(d0, n, half_width):
    xi = profile_grid(d0, points=1025, half_width=half_width)
    h = xi[1] - xi[0]
    if n == 1:
        return np.trapezoid(gaussian(xi, d0, 1), dx=h)
    X, Y = np.meshgrid(xi, xi, indexing="ij")
    return np.trapezoid(np.trapezoid(gaussian(np.stack([X, Y]), d0, 2), dx=h), dx=h)


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("d0", [0.3, 1.0, 2.5])
def test_gaussian_normalization(n, d0):
    assert abs(_mass(d0, n, 10.0) - 1.0) < 1e-8


@pytest.mark.parametrize("n", [1, 2])
def test_gaussian_tail_on_profile_window(n):
    # the |xi| <= 8 sqrt(d0) window misses exactly the erfc(4) tail per axis
    from scipy.special import erf
    assert _mass(0.7, n, 8.0) == pytest.approx(erf(4.0) ** n, abs=1e-10)


@pytest.mark.parametrize("n,L,M", [(1, 200.0, 4096), (2, 64.0, 1024)])
def test_exact_self_similar_profile(n, L, M):
    d0, a_star, t = 0.75, 0.3, 50.0
    g = Grid(n, L, M)
    if n == 1:
        alpha = a_star * gaussian(g.x / math.sqrt(t), d0, 1) / math.sqrt(t)
    else:
        X, Y = g.coords()
        alpha = a_star * gaussian(np.stack([X, Y]) / math.sqrt(t), d0, 2) / t
    ph = PhaseField(t, alpha, np.zeros((2,) + alpha.shape), g)
    cmp_ = compare_profile(ph, a_star, d0, n)
    assert cmp_.err_linf < 1e-10 and cmp_.err_l1 < 1e-10
    assert cmp_.xi.size == 257


def test_underresolved():
    g = Grid(1, 200.0, 64)
    ph = PhaseField(10.0, np.zeros(64), np.zeros((2, 64)), g)
    with pytest.raises(UnderResolved):
        compare_profile(ph, 1.0, 1.0, 1)


def test_profile_needs_late_time():
    g = Grid(1, 200.0, 2048)
    ph = PhaseField(5.0, np.zeros(2048), np.zeros((2, 2048)), g)
    with pytest.raises(ValueError):
        compare_profile(ph, 1.0, 1.0, 1)


def test_csv_outputs(tmp_path, tilted):
    model, _, orbit, adj = tilted
    g = Grid(1, 100.0, 1024)
    x = g.x
    v = 1e-3 * np.stack([np.zeros_like(x), np.exp(-x**2 / 50)])
    snaps = {20.0: _state(orbit, model, g, v, 20.0)}
    rows, comps = analyze_snapshots(snaps, orbit, adj, 0.01, 0.75)
    write_asymptotics_csv(rows, tmp_path / "a.csv")
    comps[0].write_csv(tmp_path / "p.csv")
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == \
        "t,alpha_mass,beta_l1,beta_linf_scaled,profile_err_l1,profile_err_linf"
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "xi,rescaled_alpha,alpha_star_G" and len(lines) == 258
