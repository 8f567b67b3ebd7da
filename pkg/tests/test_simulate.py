import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from floquet_rd import simulate as sim
from floquet_rd.errors import BlowUp, PerturbationTooWide
from floquet_rd.floquet import adjoint_solution, monodromy
from floquet_rd.kinetics import model_from_function
from floquet_rd.simulate import (
    FieldState, Grid, PerturbationSpec, SimConfig, diffuse, init_state, linearized_run,
    mode_coefficient, norms, read_snapshot, run, step, write_snapshot, x_norm,
)

BUMP = PerturbationSpec(amplitude=1e-2, width=2.0, direction=(0.0, 1.0), center=(0.0,))


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(1, 10.0, 100)
    with pytest.raises(ValueError):
        Grid(3, 10.0, 64)
    with pytest.raises(ValueError):
        Grid(1, -1.0, 64)
    g = Grid(1, math.pi, 16)
    assert g.k_squared()[1] == pytest.approx(1.0)


def test_zero_amplitude_sits_on_orbit(stable_case):
    model, _, orbit = stable_case
    st_ = init_state(orbit, 1.3, PerturbationSpec(amplitude=0.0), Grid(1, 20.0, 64), model)
    assert np.array_equal(st_.values, np.repeat(orbit.at(1.3)[:, None], 64, axis=1))


def test_gaussian_mass(stable_case):
    model, _, orbit = stable_case
    g = Grid(1, 200.0, 2048)
    v = init_state(orbit, 0.0, BUMP, g, model, linear=True).values
    l1, _, linf = norms(v, g)
    assert l1 == pytest.approx(1e-2 * 2.0 * math.sqrt(2 * math.pi), rel=1e-12)
    assert linf == pytest.approx(1e-2)
    assert x_norm(v, g) == pytest.approx(l1 + linf)


def test_too_wide_bump(stable_case):
    model, _, orbit = stable_case
    with pytest.raises(PerturbationTooWide):
        init_state(orbit, 0.0, PerturbationSpec(width=3.0), Grid(1, 20.0, 64), model)


def test_snapshot_round_trip(tmp_path, stable_case):
    model, _, orbit = stable_case
    g = Grid(2, 8.0, 32)
    rng = np.random.default_rng(7)
    data = rng.normal(size=(2, 32, 32))
    path = tmp_path / "v0.rdsnap"
    write_snapshot(path, data, g, 3.5)
    head, back = read_snapshot(path)
    assert head == {"n": 2, "N": 2, "M": 32, "L": 8.0, "t": 3.5}
    assert np.array_equal(back, data)
    raw = path.read_bytes()
    assert raw[:7] == b"RDSNAP1" and len(raw) == 8 + 5 * 8 + data.size * 8
    st_ = init_state(orbit, 0.0, PerturbationSpec(shape="file", file=str(path)), g, model,
                     linear=True)
    assert np.array_equal(st_.values, data)


@given(st.integers(1, 5), st.floats(0.1, 3.0))
def test_pure_diffusion_is_exact(m, t):
    g = Grid(1, 2 * math.pi, 32)
    D = np.array([[1.0, 0.4], [-0.2, 0.5]])
    k = m * math.pi / g.L
    w = np.array([0.3, -1.0])
    u = w[:, None] * np.cos(k * g.x)
    out = diffuse(u, g, D, t)
    from scipy.linalg import expm
    ref = (expm(-k * k * D * t) @ w)[:, None] * np.cos(k * g.x)
    assert np.allclose(out, ref, atol=1e-13)


def test_pure_reaction_fourth_order(stable_case):
    model, _, orbit = stable_case
    g = Grid(1, 20.0, 16)
    errs = []
    for dt in (2 * math.pi / 100, 2 * math.pi / 200):
        st_ = init_state(orbit, 0.0, PerturbationSpec(amplitude=0.0), g, model)
        for _ in range(int(round(2 * math.pi / dt))):
            step(st_, dt, np.zeros((2, 2)))
        errs.append(np.max(np.abs(st_.values - orbit.at(0.0)[:, None])))
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.1)


def _solution_at_10(case, dt, scheme="strang"):
    model, D, orbit = case
    g = Grid(1, 20.0, 128)
    st_ = init_state(orbit, 0.0, PerturbationSpec(amplitude=0.2, width=2.0), g, model)
    for _ in range(int(round(10 / dt))):
        step(st_, dt, D, scheme)
    return st_.values


@pytest.mark.parametrize("scheme,order", [("strang", 2.0), ("lie", 1.0)])
def test_splitting_order(tilted_case, scheme, order):
    u1, u2, u4 = (_solution_at_10(tilted_case, dt, scheme) for dt in (0.05, 0.025, 0.0125))
    rate = math.log2(np.max(np.abs(u1 - u2)) / np.max(np.abs(u2 - u4)))
    assert rate == pytest.approx(order, abs=0.2)


def test_unperturbed_run_stays_on_orbit(stable_case):
    model, D, orbit = stable_case
    g = Grid(1, 20.0, 64)
    st_ = init_state(orbit, 0.0, PerturbationSpec(amplitude=0.0), g, model)
    res = run(st_, SimConfig(dt=0.01, t_end=20.0, snapshot_times=()), D, orbit)
    assert np.max(res.linf) < 1e-8


def test_deterministic_replay(tilted_case):
    model, D, orbit = tilted_case
    g = Grid(1, 30.0, 128)
    cfg = SimConfig(dt=0.02, t_end=5.0, snapshot_times=())
    a = run(init_state(orbit, 0.0, BUMP, g, model), cfg, D, orbit)
    b = run(init_state(orbit, 0.0, BUMP, g, model), cfg, D, orbit)
    assert np.array_equal(a.linf, b.linf) and np.array_equal(a.l1, b.l1)


def test_resolution_independence(stable_case):
    model, D, orbit = stable_case
    cfg = SimConfig(dt=0.01, t_end=100.0, snapshot_times=())
    out = []
    for M in (512, 1024):
        g = Grid(1, 50.0, M)
        out.append(run(init_state(orbit, 0.0, BUMP, g, model), cfg, D, orbit))
    for name in ("l1", "l2", "linf"):
        assert abs(getattr(out[0], name)[-1] - getattr(out[1], name)[-1]) < 1e-6


def test_linear_mode_follows_monodromy(tilted_case):
    model, D, orbit = tilted_case
    T = orbit.period
    g = Grid(1, 2 * math.pi, 32)
    pert = PerturbationSpec(shape="fourier-mode", amplitude=1.0, direction=(1.0, 0.0), mode=(2,))
    st_ = init_state(orbit, 0.0, pert, g, model, linear=True)
    res = linearized_run(st_, SimConfig(dt=T / 400, t_end=2 * T, snapshot_times=()), D, orbit)
    F = monodromy(model, orbit, D, 2 * math.pi / g.L).F
    w0 = mode_coefficient(st_.values, g, (2,))
    assert np.allclose(mode_coefficient(res.final.values, g, (2,)), F @ F @ w0, atol=1e-8)


def test_linear_phase_mass_is_conserved(tilted_case):
    model, D, orbit = tilted_case
    adj = adjoint_solution(model, orbit)
    g = Grid(1, 40.0, 256)
    st_ = init_state(orbit, 0.0, BUMP, g, model, linear=True)
    res = linearized_run(st_, SimConfig(dt=0.01, t_end=30.0, snapshot_times=()), D, orbit, adj)
    m = res.phase_mass
    assert np.max(np.abs(m - m[0])) < 1e-6 * abs(m[0])


def test_two_dimensional_mode(stable_case):
    model, D, orbit = stable_case
    g = Grid(2, 2 * math.pi, 16)
    pert = PerturbationSpec(shape="fourier-mode", amplitude=1e-3, direction=(0.0, 1.0),
                            mode=(1, 1))
    st_ = init_state(orbit, 0.0, pert, g, model, linear=True)
    res = linearized_run(st_, SimConfig(dt=0.05, t_end=2.0, snapshot_times=()), D, orbit)
    assert res.final.values.shape == (2, 16, 16)
    assert np.all(np.isfinite(res.linf))


def test_blowup_is_reported_with_time():
    model = model_from_function(lambda u: u * (u[0] ** 2 + u[1] ** 2), 2)
    g = Grid(1, 5.0, 16)
    state = FieldState(0.0, np.ones((2, 16)), g, model)
    with pytest.raises(BlowUp) as exc, np.errstate(over="ignore", invalid="ignore"):
        for _ in range(1000):
            step(state, 0.01, np.eye(2))
            state.t = round(state.t, 10)
    assert 0.0 < exc.value.t < 1.0


def test_blowup_attaches_partial_result(stable_case, monkeypatch):
    model, D, orbit = stable_case
    monkeypatch.setattr(sim, "BLOWUP_LEVEL", 0.4)
    st_ = init_state(orbit, 0.0, PerturbationSpec(amplitude=0.3, width=1.0), Grid(1, 20.0, 64), model)
    with pytest.raises(BlowUp) as exc:
        run(st_, SimConfig(dt=0.01, t_end=10.0, snapshot_times=()), D, orbit)
    assert exc.value.result.times.size >= 1


def test_unstable_run_warns(sideband_case):
    model, D, orbit = sideband_case
    st_ = init_state(orbit, 0.0, PerturbationSpec(amplitude=1e-3), Grid(1, 40.0, 64), model)
    with pytest.warns(UserWarning):
        run(st_, SimConfig(dt=0.05, t_end=1.0, snapshot_times=()), D, orbit, stable=False)


def test_norm_csv(tmp_path, stable_case):
    model, D, orbit = stable_case
    st_ = init_state(orbit, 0.0, BUMP, Grid(1, 20.0, 64), model)
    res = run(st_, SimConfig(dt=0.05, t_end=2.0, snapshot_times=()), D, orbit,
              adjoint_solution(model, orbit))
    res.write_csv(tmp_path / "n.csv")
    lines = (tmp_path / "n.csv").read_text().splitlines()
    assert lines[0] == "t,l1,l2,linf,phase_mass"
    assert len(lines) == 4
