"""Phase extraction, decay-rate fits and Gaussian profile comparison."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.ndimage import map_coordinates

from .errors import EmptyWindow, OutOfTube, UnderResolved
from .simulate import norms, perturbation, perturbation_field

PROFILE_POINTS = 257
PROFILE_HALF_WIDTH = 8.0
TUBE_FACTOR = 0.2


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    prefactor: float
    window: tuple
    goodness: float
    n_points: int


def measure_decay(times, values, window=(10.0, math.inf)) -> DecayFit:
    """OLS fit of ``log(norm)`` against ``log(1 + t)``; returns ``p`` with norm ~ (1+t)^-p."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    sel = (t >= window[0]) & (t <= window[1])
    if np.count_nonzero(sel) < 10:
        raise EmptyWindow(f"fewer than 10 samples in window {tuple(window)}")
    t, y = t[sel], y[sel]
    if np.any(~(y > 0)):
        raise EmptyWindow("norms must be positive inside the fit window")
    X = np.log1p(t)
    Y = np.log(y)
    A = np.column_stack([X, np.ones_like(X)])
    (slope, icpt), *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = Y - (slope * X + icpt)
    return DecayFit(float(-slope), float(math.exp(icpt)), (float(window[0]), float(window[1])),
                    float(np.max(np.abs(resid))), int(t.size))


def tube_radius(orbit, factor=TUBE_FACTOR) -> float:
    """``factor * min|u'| / max curvature`` of the orbit, from its spectral interpolant."""
    M = orbit.n_samples
    d1 = orbit.derivatives
    coef = np.fft.rfft(d1, axis=0)
    m = np.arange(coef.shape[0])
    if M % 2 == 0:
        m = m.astype(float)
        m[-1] = 0.0
    d2 = np.fft.irfft(coef * (1j * orbit.omega * m)[:, None], n=M, axis=0)
    speed = np.linalg.norm(d1, axis=1)
    cross2 = speed**2 * np.sum(d2 * d2, axis=1) - np.sum(d1 * d2, axis=1) ** 2
    curv = np.sqrt(np.maximum(cross2, 0.0)) / speed**3
    kmax = float(np.max(curv))
    if kmax <= 0:
        return math.inf
    return factor * float(np.min(speed)) / kmax


@dataclass
class PhaseField:
    t: float
    values: np.ndarray
    beta: np.ndarray
    grid: object
    method: str = "adjoint-projection"

    @property
    def mass(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)

    def beta_norms(self):
        return norms(self.beta, self.grid)


def extract_phase(state, orbit, adjoint, guard=True) -> PhaseField:
    """Split ``v = u'_*(s) alpha + beta`` with ``alpha = (U_*(s), v)``, ``s = t0 + t``."""
    v = perturbation(state, orbit)
    if guard:
        sup = float(np.max(np.sqrt(np.sum(v * v, axis=0))))
        r = tube_radius(orbit)
        if sup >= r:
            raise OutOfTube(f"|v|_inf = {sup:.3g} exceeds tube radius {r:.3g} at t = {state.t:g}")
    s = state.t0 + state.t
    U = adjoint.at(s)
    du = orbit.derivative_at(s)
    alpha = np.tensordot(U, v, axes=1)
    beta = v - du.reshape((-1,) + (1,) * state.grid.n) * alpha
    return PhaseField(float(state.t), alpha, beta, state.grid)


def predicted_alpha_star(pert, orbit, adjoint, t0, grid):
    """Quadrature of ``(U_*(t0), v0(x))`` over the box.

    Returns ``(alpha_star, band)``; ``band = delta * |v0|_L1`` sizes the
    neglected quadratic correction.
    """
    v0 = perturbation_field(pert, grid, orbit.dimension)
    U = adjoint.at(t0)
    a = float(np.sum(np.tensordot(U, v0, axes=1)) * grid.cell_volume)
    l1, _, linf = norms(v0, grid)
    delta = max(linf, abs(pert.amplitude))
    return a, delta * l1


def gaussian(xi, d0, n):
    """Heat kernel at unit time for diffusivity ``d0`` in ``n`` dimensions."""
    xi = np.asarray(xi, dtype=float)
    r2 = xi**2 if n == 1 else np.sum(xi**2, axis=0)
    return (4 * math.pi * d0) ** (-n / 2) * np.exp(-r2 / (4 * d0))


def profile_grid(d0, points=PROFILE_POINTS, half_width=PROFILE_HALF_WIDTH):
    h = half_width * math.sqrt(d0)
    return np.linspace(-h, h, points)


@dataclass(frozen=True)
class ProfileComparison:
    t: float
    xi: np.ndarray
    rescaled: np.ndarray
    alpha_star: float
    reference: np.ndarray
    err_l1: float
    err_linf: float

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if self.rescaled.ndim == 1:
                w.writerow(["xi", "rescaled_alpha", "alpha_star_G"])
                for row in zip(self.xi, self.rescaled, self.reference):
                    w.writerow([repr(float(x)) for x in row])
            else:
                w.writerow(["xi_1", "xi_2", "rescaled_alpha", "alpha_star_G"])
                for i, a in enumerate(self.xi):
                    for j, b in enumerate(self.xi):
                        w.writerow([repr(float(a)), repr(float(b)),
                                    repr(float(self.rescaled[i, j])),
                                    repr(float(self.reference[i, j]))])


def _interp_periodic(values, grid, pts):
    """Cubic interpolation of a periodic grid function at physical points ``pts``."""
    if grid.n == 1:
        x = np.append(grid.x, grid.L)
        y = np.append(values, values[:1])
        spl = CubicSpline(x, y, bc_type="periodic")
        q = np.mod(pts + grid.L, 2 * grid.L) - grid.L
        return spl(q)
    idx = [(np.mod(p + grid.L, 2 * grid.L)) / grid.dx for p in pts]
    return map_coordinates(values, idx, order=3, mode="grid-wrap")


def compare_profile(phase: PhaseField, alpha_star, d0, n=None) -> ProfileComparison:
    """Compare ``t^{n/2} alpha(t, xi sqrt(t))`` with ``alpha_star * G(xi)`` on ``|xi| <= 8 sqrt(d0)``."""
    grid = phase.grid
    n = grid.n if n is None else n
    t = phase.t
    if t < 10:
        raise ValueError("profile comparison needs t >= 10")
    if not d0 > 0:
        raise ValueError("profile comparison needs d0 > 0")
    if np.count_nonzero(np.abs(grid.x) <= 4 * math.sqrt(d0 * t)) < 32:
        raise UnderResolved(f"fewer than 32 grid points within 4 sqrt(d0 t) at t = {t:g}")
    xi = profile_grid(d0)
    h = xi[1] - xi[0]
    st = math.sqrt(t)
    if n == 1:
        rescaled = t ** 0.5 * _interp_periodic(phase.values, grid, xi * st)
        ref = alpha_star * gaussian(xi, d0, 1)
    else:
        X, Y = np.meshgrid(xi, xi, indexing="ij")
        rescaled = t * _interp_periodic(phase.values, grid, (X * st, Y * st))
        ref = alpha_star * gaussian(np.stack([X, Y]), d0, 2)
    diff = np.abs(rescaled - ref)
    l1 = float(np.trapezoid(diff, dx=h)) if n == 1 else float(
        np.trapezoid(np.trapezoid(diff, dx=h, axis=1), dx=h))
    return ProfileComparison(t, xi, rescaled, float(alpha_star), ref, l1, float(np.max(diff)))


@dataclass(frozen=True)
class AsymptoticsRow:
    t: float
    alpha_mass: float
    beta_l1: float
    beta_linf_scaled: float
    profile_err_l1: float
    profile_err_linf: float


def analyze_snapshots(snapshots, orbit, adjoint, alpha_star, d0, guard=True):
    """One :class:`AsymptoticsRow` per snapshot (sorted by time) plus the comparisons."""
    rows, comps = [], []
    for t in sorted(snapshots):
        st = snapshots[t]
        ph = extract_phase(st, orbit, adjoint, guard=guard)
        bl1, _, binf = ph.beta_norms()
        n = st.grid.n
        comp: Optional[ProfileComparison]
        try:
            comp = compare_profile(ph, alpha_star, d0, n)
            e1, einf = comp.err_l1, comp.err_linf
        except UnderResolved:
            comp, e1, einf = None, math.nan, math.nan
        comps.append(comp)
        rows.append(AsymptoticsRow(ph.t, ph.mass, bl1, binf * (1 + ph.t) ** (n / 2), e1, einf))
    return rows, comps


def write_asymptotics_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "alpha_mass", "beta_l1", "beta_linf_scaled",
                    "profile_err_l1", "profile_err_linf"])
        for r in rows:
            w.writerow([repr(float(x)) for x in (r.t, r.alpha_mass, r.beta_l1,
                                                 r.beta_linf_scaled, r.profile_err_l1,
                                                 r.profile_err_linf)])
