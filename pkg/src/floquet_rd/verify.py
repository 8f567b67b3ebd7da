"""Acceptance checks shared by ``floquet-rd verify`` and the test suite."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .asymptotics import analyze_snapshots, measure_decay, predicted_alpha_star
from .floquet import (
    Verdict, adjoint_solution, analyze, compute_d0, curvature_sweep, fit_curvature,
    fit_window, floquet_exponents, monodromy,
)
from .kinetics import DiffusionMatrix, ExampleParams, make_example_model
from .orbit import find_orbit
from .simulate import (
    Grid, PerturbationSpec, SimConfig, init_state, linearized_run, mode_coefficient,
    perturbation, run,
)

DEFAULT_TOLERANCES = {
    "d0_quadrature": 1e-6,
    "d0_fit": 1e-4,
    "lambda2": 1e-8,
    "multiplier": 1e-8,
    "commuting": 1e-8,
    "diffusive_limit": 0.02,
    "decay_linf": 0.05,
    "decay_l1": 0.05,
    "alpha_mass": 0.10,
    "refined_ratio": 1.3,
    "monodromy_power": 1e-6,
    "gap_ratio_low": 3.5,
    "gap_ratio_high": 4.5,
    "decay_2d": 0.15,
}

STABLE_D = ((1.0, 0.0), (0.0, 0.5))
SIDEBAND_D = ((2.0, 3.0), (0.5, 1.0))
TURING_D = ((4.0, -6.0), (0.1, 1.0))


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float
    budget: float
    metrics: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name:<22s} {self.elapsed:8.2f}s / {self.budget:g}s  {self.detail}"


@dataclass(frozen=True)
class Check:
    number: int
    name: str
    tags: tuple
    budget: float
    func: Callable
    slow: bool = False

    def matches(self, token: str) -> bool:
        if token.isdigit():
            return token == str(self.number)
        return token in self.tags or token in self.name


def setup_example(epsilon, theta, D):
    p = ExampleParams(float(epsilon), float(theta), DiffusionMatrix(np.asarray(D, float)))
    model = make_example_model(p)
    orbit = find_orbit(model, [0.9 * epsilon, 0.0], 2 * math.pi)
    return model, p.D, orbit


def random_examples(seed, count=20):
    """Seeded ``(epsilon, theta, D)`` triples with ``D + D^T`` positive definite."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        theta = rng.uniform(-1.2, 1.2)
        eps = rng.uniform(0.2, 1.0)
        while True:
            D = rng.uniform(-1.0, 2.0, (2, 2))
            D[0, 0] = rng.uniform(0.2, 2.0)
            D[1, 1] = rng.uniform(0.2, 2.0)
            if np.min(np.linalg.eigvalsh(D + D.T)) > 0.1:
                break
        out.append((eps, theta, D))
    return out


def _d0_agreement(tol, seed):
    worst_q = worst_f = 0.0
    for eps, theta, D in random_examples(seed):
        model, Dm, orbit = setup_example(eps, theta, D)
        adj = adjoint_solution(model, orbit)
        d0 = compute_d0(orbit, adj, Dm)
        kf = fit_window(model, orbit, Dm, d0)
        fit = fit_curvature(curvature_sweep(model, orbit, Dm, kf).neutral_branch, kf)
        ref = model.oracles.d0
        worst_q = max(worst_q, abs(d0 - ref))
        worst_f = max(worst_f, abs(fit - ref))
    ok = worst_q <= tol["d0_quadrature"] and worst_f <= tol["d0_fit"]
    return ok, f"quadrature err {worst_q:.2e}, fit err {worst_f:.2e}", {
        "quadrature": worst_q, "fit": worst_f}


def _floquet_oracle(tol, seed):
    worst_l = worst_m = 0.0
    for eps, theta, D in random_examples(seed):
        model, Dm, orbit = setup_example(eps, theta, D)
        mono = monodromy(model, orbit, Dm, 0.0)
        mu = mono.multipliers()
        j = int(np.argmin(np.abs(mu - 1.0)))
        worst_m = max(worst_m, abs(mu[j] - 1.0))
        lam = floquet_exponents(mono, orbit.period)
        other = lam[np.argmax(np.abs(lam))] if lam.size > 1 else lam[0]
        worst_l = max(worst_l, abs(other - model.oracles.lambda2))
    ok = worst_l <= tol["lambda2"] and worst_m <= tol["multiplier"]
    return ok, f"lambda2 err {worst_l:.2e}, neutral multiplier err {worst_m:.2e}", {
        "lambda2": worst_l, "multiplier": worst_m}


def _commuting(tol, seed):
    model, Dm, orbit = setup_example(0.5, 0.3, np.eye(2))
    omega = orbit.omega
    lam0 = floquet_exponents(monodromy(model, orbit, Dm, 0.0), orbit.period)
    worst = 0.0
    for k in np.linspace(0.0, 3.0, 100):
        lam = floquet_exponents(monodromy(model, orbit, Dm, k), orbit.period)
        for target in lam0 - k * k:
            d = lam - target
            d = d.real + 1j * ((d.imag + omega / 2) % omega - omega / 2)
            worst = max(worst, float(np.min(np.abs(d))))
    return worst <= tol["commuting"], f"max deviation {worst:.2e}", {"deviation": worst}


def _classification(tol, seed):
    cases = [
        ("sideband", (0.5, 0.9, SIDEBAND_D), Verdict.SIDEBAND),
        ("turing", (0.05, 0.0, TURING_D), Verdict.TURING),
        ("stable", (0.5, 0.0, np.eye(2)), Verdict.STABLE),
    ]
    parts, ok, metrics = [], True, {}
    for label, args, want in cases:
        model, Dm, orbit = setup_example(*args)
        rep = analyze(model, orbit, Dm).report
        good = rep.verdict == want
        if want == Verdict.TURING:
            lo, hi = model.oracles.turing_interval()
            k2 = rep.k_star**2 if rep.k_star is not None else math.nan
            good = good and lo < k2 < hi
            metrics["k_star_sq"] = k2
            parts.append(f"{label}: {rep.verdict.value} k*^2={k2:.4f} in ({lo:.4f}, {hi:.4f})")
        else:
            parts.append(f"{label}: {rep.verdict.value}")
        metrics[label] = rep.verdict.value
        ok = ok and good
    return ok, "; ".join(parts), metrics


def _diffusive_limit(tol, seed):
    model, Dm, orbit = setup_example(0.5, 0.3, STABLE_D)
    d0 = model.oracles.d0
    T = orbit.period
    ok, parts, metrics = True, [], {}
    for kappa in (0.5, 1.0, 2.0):
        errs = []
        for m in (64, 256, 1024):
            mu = monodromy(model, orbit, Dm, kappa / math.sqrt(m * T)).multipliers()
            mu1 = mu[np.argmin(np.abs(mu - 1.0))].real
            errs.append(abs(mu1**m - math.exp(-d0 * kappa**2)))
        mono = errs[0] > errs[1] > errs[2]
        ok = ok and mono and errs[2] < tol["diffusive_limit"]
        metrics[kappa] = errs
        parts.append(f"kappa={kappa:g}: " + ", ".join(f"{e:.1e}" for e in errs))
    return ok, "; ".join(parts), metrics


_RUN_CACHE: dict = {}


def decay_run(amplitude=1e-2):
    """The n = 1 stable-example run shared by the decay and profile checks."""
    key = ("n1", amplitude)
    if key not in _RUN_CACHE:
        model, Dm, orbit = setup_example(0.5, 0.0, np.eye(2))
        adj = adjoint_solution(model, orbit)
        grid = Grid(1, 200.0, 2048)
        pert = PerturbationSpec(amplitude=amplitude, width=2.0, direction=(0.0, 1.0), center=(0.0,))
        state = init_state(orbit, 0.0, pert, grid, model)
        res = run(state, SimConfig(dt=0.01, t_end=500.0), Dm, orbit, adj)
        _RUN_CACHE[key] = (model, orbit, adj, grid, pert, res)
    return _RUN_CACHE[key]


def _decay_n1(tol, seed):
    _, _, _, _, _, res = decay_run()
    p_inf = measure_decay(res.times, res.linf, (50.0, 400.0)).exponent
    p_l1 = measure_decay(res.times, res.l1, (50.0, 400.0)).exponent
    ok = abs(p_inf - 0.5) <= tol["decay_linf"] and abs(p_l1) <= tol["decay_l1"]
    return ok, f"p_inf={p_inf:.4f}, p_l1={p_l1:.2e}", {"p_inf": p_inf, "p_l1": p_l1}


def _profile(tol, seed):
    model, orbit, adj, grid, pert, res = decay_run()
    a_star, _ = predicted_alpha_star(pert, orbit, adj, 0.0, grid)
    rows, _ = analyze_snapshots(res.snapshots, orbit, adj, a_star, model.oracles.d0)
    by_t = {r.t: r for r in rows}
    e100, e400 = by_t[100.0].profile_err_linf, by_t[400.0].profile_err_linf
    mass = by_t[400.0].alpha_mass
    rel = abs(mass - a_star) / abs(a_star)
    ratio = e100 / e400
    ok = e400 < e100 and rel <= tol["alpha_mass"] and ratio >= tol["refined_ratio"]
    return ok, (f"err(100)={e100:.2e}, err(400)={e400:.2e}, ratio={ratio:.2f}, "
                f"mass rel err={rel:.1e}"), {"e100": e100, "e400": e400, "ratio": ratio,
                                             "mass_rel": rel}


def _consistency(tol, seed):
    model, Dm, orbit = setup_example(0.5, 0.3, STABLE_D)
    T = orbit.period
    grid = Grid(1, 2 * math.pi, 64)  # mode 1 has k0 = 0.5
    pert = PerturbationSpec(shape="fourier-mode", amplitude=1.0, direction=(0.6, 0.8), mode=(1,))
    st = init_state(orbit, 0.0, pert, grid, model, linear=True)
    cfg = SimConfig(dt=T / 628, t_end=8 * T, record_every=T, snapshot_times=())
    res = linearized_run(st, cfg, Dm, orbit)
    w0 = mode_coefficient(st.values, grid, (1,))
    got = mode_coefficient(res.final.values, grid, (1,))
    ref = np.linalg.matrix_power(monodromy(model, orbit, Dm, math.pi / grid.L).F, 8) @ w0
    err = float(np.max(np.abs(got - ref)) / np.max(np.abs(w0)))

    g2 = Grid(1, 50.0, 512)
    cfg2 = SimConfig(dt=0.01, t_end=10.0, snapshot_times=())
    gaps = []
    for delta in (1e-2, 5e-3):
        p = PerturbationSpec(amplitude=delta, width=2.0, direction=(0.0, 1.0), center=(0.0,))
        full = run(init_state(orbit, 0.0, p, g2, model), cfg2, Dm, orbit)
        lin = linearized_run(init_state(orbit, 0.0, p, g2, model, linear=True), cfg2, Dm, orbit)
        gaps.append(float(np.max(np.abs(perturbation(full.final, orbit) - lin.final.values))))
    ratio = gaps[0] / gaps[1]
    ok = err <= tol["monodromy_power"] and tol["gap_ratio_low"] <= ratio <= tol["gap_ratio_high"]
    return ok, f"power err {err:.1e}, gap ratio {ratio:.3f}", {"power_err": err, "gap_ratio": ratio}


def _decay_n2(tol, seed):
    model, Dm, orbit = setup_example(0.5, 0.0, np.eye(2))
    grid = Grid(2, 64.0, 256)
    pert = PerturbationSpec(amplitude=1e-2, width=2.0, direction=(0.0, 1.0), center=(0.0, 0.0))
    res = run(init_state(orbit, 0.0, pert, grid, model),
              SimConfig(dt=0.01, t_end=100.0, snapshot_times=()), Dm, orbit)
    p = measure_decay(res.times, res.linf, (20.0, 100.0)).exponent
    return abs(p - 1.0) <= tol["decay_2d"], f"p_inf={p:.4f}", {"p_inf": p}


CHECKS = (
    Check(1, "d0_agreement", ("floquet",), 30.0, _d0_agreement),
    Check(2, "floquet_oracle", ("floquet",), 10.0, _floquet_oracle),
    Check(3, "commuting_diffusion", ("floquet",), 10.0, _commuting),
    Check(4, "classification", ("floquet",), 30.0, _classification),
    Check(5, "diffusive_limit", ("floquet",), 60.0, _diffusive_limit),
    Check(6, "decay_n1", ("simulate", "asymptotics"), 300.0, _decay_n1),
    Check(7, "phase_profile", ("asymptotics",), 300.0, _profile),
    Check(8, "linear_consistency", ("simulate",), 120.0, _consistency),
    Check(9, "decay_n2", ("simulate",), 600.0, _decay_n2, slow=True),
)


def select_checks(filter_=None, slow=False):
    tokens = [t.strip() for t in (filter_ or "").split(",") if t.strip()]
    out = []
    for c in CHECKS:
        if tokens and not any(c.matches(t) for t in tokens):
            continue
        if c.slow and not slow and not tokens:
            continue
        out.append(c)
    return out


def run_check(check: Check, tolerances=None, seed=42) -> CheckResult:
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    t0 = time.perf_counter()
    try:
        ok, detail, metrics = check.func(tol, seed)
    except Exception as exc:  # a crashing check is a failing check
        ok, detail, metrics = False, f"error: {type(exc).__name__}: {exc}", {}
    elapsed = time.perf_counter() - t0
    if elapsed > check.budget:
        ok = False
        detail += f" (over time budget)"
    return CheckResult(f"{check.number}.{check.name}", bool(ok), detail, elapsed,
                       check.budget, metrics)


def run_suite(filter_=None, slow=False, tolerances=None, seed=42, echo=print):
    results = []
    for c in select_checks(filter_, slow):
        r = run_check(c, tolerances, seed)
        if echo is not None:
            echo(r.line())
        results.append(r)
    return results
