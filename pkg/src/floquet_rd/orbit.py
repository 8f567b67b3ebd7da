"""Periodic orbits of the kinetics ODE: shooting, sampling and interpolation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import DegenerateOrbit, NonConvergence
from .flow import ATOL, RTOL, flow, variational_flow


@dataclass(frozen=True)
class PeriodicOrbit:
    """Uniform samples ``u_*(t_i)``, ``t_i = i T / M``, with an interpolation rule.

    ``samples`` and ``derivatives`` have shape ``(M, N)``; ``derivatives`` holds
    ``f(u_*(t_i))``. Evaluators return arrays of shape ``(N,)`` for scalar time
    and ``(N, P)`` for ``P`` times.
    """

    period: float
    samples: np.ndarray
    derivatives: np.ndarray
    interpolation: str = "trig"
    shooting_residual: float = 0.0
    newton_iterations: int = 0

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("period must be positive")
        if self.interpolation not in ("trig", "cubic"):
            raise ValueError(f"unknown interpolation rule {self.interpolation!r}")
        for name in ("samples", "derivatives"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.samples.shape != self.derivatives.shape or self.samples.ndim != 2:
            raise ValueError("samples and derivatives must both have shape (M, N)")

    @property
    def omega(self) -> float:
        return 2 * math.pi / self.period

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def dimension(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * (self.period / self.n_samples)

    @property
    def u0(self) -> np.ndarray:
        return self.samples[0].copy()

    @cached_property
    def _rfft(self):
        return np.fft.rfft(self.samples, axis=0) / self.n_samples

    @cached_property
    def _spline(self):
        t = np.append(self.times, self.period)
        y = np.vstack([self.samples, self.samples[:1]])
        return CubicSpline(t, y, axis=0, bc_type="periodic")

    def _trig(self, t, order):
        M = self.n_samples
        a = self._rfft
        m = np.arange(a.shape[0])
        weights = np.full(m.size, 2.0)
        weights[0] = 1.0
        if M % 2 == 0:
            weights[-1] = 1.0
        phase = np.exp(1j * self.omega * np.outer(t, m))
        coef = a * weights[:, None]
        if order == 1:
            coef = coef * (1j * self.omega * m)[:, None]
        if M % 2 == 0 and order == 1:
            # Nyquist mode interpolates as a cosine; its derivative is a sine
            nyq = M // 2
            out = (phase[:, :-1] @ coef[:-1]).real
            out -= np.outer(np.sin(nyq * self.omega * t), a[-1].real * nyq * self.omega)
            return out
        if M % 2 == 0:
            out = (phase[:, :-1] @ coef[:-1]).real
            out += np.outer(np.cos(M // 2 * self.omega * t), a[-1].real)
            return out
        return (phase @ coef).real

    def _eval(self, t, order):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.mod(np.atleast_1d(t), self.period)
        if self.interpolation == "trig":
            vals = self._trig(tt, order)
        else:
            vals = self._spline(tt, order)
        vals = vals.T
        return vals[:, 0] if scalar else vals

    def at(self, t):
        return self._eval(t, 0)

    def derivative_at(self, t):
        """Time derivative of the interpolant (not ``f`` of it)."""
        return self._eval(t, 1)

    def with_interpolation(self, rule: str) -> "PeriodicOrbit":
        return PeriodicOrbit(self.period, self.samples, self.derivatives, rule,
                             self.shooting_residual, self.newton_iterations)


def orbit_from_function(model, fn, period, samples=256, interpolation="trig"):
    """Sample a known orbit ``fn(t) -> (N, P)`` (e.g. an analytic solution)."""
    t = np.arange(samples) * (period / samples)
    u = np.asarray(fn(t), dtype=float)
    du = np.asarray(model.f(u), dtype=float)
    return PeriodicOrbit(float(period), u.T, du.T, interpolation)


def sample_orbit(model, u0, period, samples=256, interpolation="trig",
                 rtol=RTOL, atol=ATOL, **meta):
    dt = period / samples
    pts = np.empty((samples, u0.size))
    u = np.array(u0, dtype=float)
    h = 0.0
    for i in range(samples):
        pts[i] = u
        if i + 1 < samples:
            u, h = flow(model, u, i * dt, (i + 1) * dt, rtol, atol, h0=h, return_step=True)
    du = np.asarray(model.f(pts.T), dtype=float).T
    return PeriodicOrbit(float(period), pts, du, interpolation, **meta)


def section_return(model, g, normal, guess_period, rtol=RTOL, atol=ATOL,
                   chunks=64, reach=3.0):
    """First positive-direction return to the section ``(normal, u - g) = 0``.

    Returns ``(t, u(t))`` or ``None`` when no return happens within
    ``reach * guess_period``.
    """
    dt = guess_period / chunks
    u = np.array(g, dtype=float)
    s_prev = 0.0
    left = False
    t = 0.0
    h = 0.0
    for _ in range(int(reach * chunks)):
        u_next, h = flow(model, u, t, t + dt, rtol, atol, h0=h, return_step=True)
        s = float(normal @ (u_next - g))
        if s < 0:
            left = True
        if left and s_prev < 0 <= s:
            def side(tau, u_a=u, t_a=t):
                return float(normal @ (flow(model, u_a, t_a, tau, rtol, atol) - g))

            t_star = brentq(side, t, t + dt, xtol=1e-14, rtol=1e-14)
            return t_star, flow(model, u, t, t_star, rtol, atol)
        s_prev = s
        u = u_next
        t += dt
    return None


def find_orbit(model, guess_point, guess_period, samples=256, newton_max_iter=25,
               tol=1e-10, interpolation="trig", rtol=RTOL, atol=ATOL):
    """Locate a periodic orbit by Newton shooting on ``(u0, T)``.

    The phase is pinned by the section ``(f(g), u0 - g) = 0`` through the guess
    point ``g``.
    """
    g = np.asarray(guess_point, dtype=float)
    if g.shape != (model.dimension,):
        raise ValueError(f"guess point must have shape ({model.dimension},)")
    if not guess_period > 0:
        raise ValueError("guess_period must be positive")
    N = model.dimension
    normal = np.asarray(model.f(g), dtype=float)
    if np.linalg.norm(normal) < 1e-14:
        raise DegenerateOrbit("guess point is an equilibrium; no section normal")
    u0, T = g.copy(), float(guess_period)
    crossing = section_return(model, g, normal, T, rtol, atol)
    if crossing is not None:
        T, u0 = crossing
    iterations = 0
    for iterations in range(newton_max_iter + 1):
        u1, M = variational_flow(model, u0, 0.0, T, rtol=rtol, atol=atol)
        r = u1 - u0
        p = float(normal @ (u0 - g))
        res = float(np.max(np.abs(r)))
        if res < tol and abs(p) < tol * max(1.0, np.linalg.norm(normal)):
            break
        if iterations == newton_max_iter:
            raise NonConvergence(
                f"shooting did not converge in {newton_max_iter} Newton steps "
                f"(residual {res:.3e})")
        A = np.zeros((N + 1, N + 1))
        A[:N, :N] = M - np.eye(N)
        A[:N, N] = model.f(u1)
        A[N, :N] = normal
        if np.linalg.cond(A) > 1e13:
            raise DegenerateOrbit("shooting Jacobian is singular beyond the phase direction")
        delta = np.linalg.solve(A, -np.concatenate([r, [p]]))
        # keep early Newton steps inside the region the guess describes
        size = max(np.linalg.norm(u0), 1e-3)
        step = np.linalg.norm(delta[:N])
        if step > 0.5 * size:
            delta *= 0.5 * size / step
        if abs(delta[N]) > 0.5 * T:
            delta *= 0.5 * T / abs(delta[N])
        # backtracking on the shooting residual; weakly attracting orbits make
        # the full Newton step overshoot from poor period guesses
        base = max(res, abs(p))
        lam = 1.0
        while True:
            u_try = u0 + lam * delta[:N]
            T_try = T + lam * delta[N]
            if T_try > 0:
                r_try = flow(model, u_try, 0.0, T_try, rtol, atol) - u_try
                p_try = float(normal @ (u_try - g))
                if max(np.max(np.abs(r_try)), abs(p_try)) < base or lam < 1e-3:
                    break
            lam *= 0.5
        if T_try <= 0:
            raise NonConvergence("period estimate became non-positive")
        u0, T = u_try, T_try
    for div in (2, 3):
        if np.max(np.abs(flow(model, u0, 0.0, T / div, rtol, atol) - u0)) < 1e-6:
            raise DegenerateOrbit(f"period is not minimal (closes at T/{div})")
    orbit = sample_orbit(model, u0, T, samples, interpolation, rtol, atol,
                         shooting_residual=res, newton_iterations=iterations)
    if np.max(np.linalg.norm(orbit.derivatives, axis=1)) <= 1e-6:
        raise DegenerateOrbit("converged to an equilibrium")
    return orbit


def closure_error(model, orbit, rtol=RTOL, atol=ATOL) -> float:
    u0 = orbit.samples[0]
    return float(np.max(np.abs(flow(model, u0, 0.0, orbit.period, rtol, atol) - u0)))


def orbit_residual(model, orbit, refine=8) -> float:
    """``max |d/dt u_*(t) - f(u_*(t))|`` of the interpolant on a fine staggered grid."""
    P = refine * orbit.n_samples
    t = (np.arange(P) + 0.5) * (orbit.period / P)
    u = orbit.at(t)
    du = orbit.derivative_at(t)
    return float(np.max(np.linalg.norm(du - np.asarray(model.f(u)), axis=0)))


def export_orbit_csv(orbit, path):
    N = orbit.dimension
    header = ["t"] + [f"u_{i + 1}" for i in range(N)] + [f"du_{i + 1}" for i in range(N)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, u, du in zip(orbit.times, orbit.samples, orbit.derivatives):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in u] + [repr(float(x)) for x in du])
