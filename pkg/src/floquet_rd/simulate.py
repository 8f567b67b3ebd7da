"""Pseudospectral simulation on periodic boxes ``[-L, L)^n``, ``n in {1, 2}``.

Time stepping is operator splitting: the reaction substep is classical RK4
applied pointwise, the diffusion substep multiplies each Fourier mode by the
exact propagator ``exp(-|k|^2 D tau)``. The linearised run replaces the
reaction by ``v' = f'(u_*(t0 + t)) v``.
"""

from __future__ import annotations

import csv
import math
import struct
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.linalg import expm

from . import _kernels
from .errors import BlowUp, PerturbationTooWide

BLOWUP_LEVEL = 1e6
SNAP_MAGIC = b"RDSNAP1\x00"
_SNAP_HEADER = struct.Struct("<8sqqqdd")


@dataclass(frozen=True)
class Grid:
    n: int
    L: float
    M: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("only n = 1 and n = 2 are supported")
        if self.M < 16 or self.M & (self.M - 1):
            raise ValueError("M must be a power of two and at least 16")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.M

    @property
    def cell_volume(self) -> float:
        return self.dx**self.n

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.M)

    @property
    def shape(self):
        return (self.M,) * self.n

    def coords(self):
        """Coordinate arrays, one per dimension, each of shape ``self.shape``."""
        if self.n == 1:
            return (self.x,)
        return tuple(np.meshgrid(self.x, self.x, indexing="ij"))

    def radius(self, center=None):
        c = np.zeros(self.n) if center is None else np.broadcast_to(np.asarray(center, float), (self.n,))
        r2 = sum((xi - ci) ** 2 for xi, ci in zip(self.coords(), c))
        return np.sqrt(r2)

    def k_squared(self):
        """``|k|^2`` on the real-FFT half spectrum."""
        kx = 2 * np.pi * np.fft.rfftfreq(self.M, self.dx)
        if self.n == 1:
            return kx**2
        ky = 2 * np.pi * np.fft.fftfreq(self.M, self.dx)
        return ky[:, None] ** 2 + kx[None, :] ** 2

    def dealias_mask(self):
        """Two-thirds rule: keep integer mode numbers with ``|m| <= M/3``."""
        cut = self.M // 3
        mx = np.arange(self.M // 2 + 1)
        keep_x = mx <= cut
        if self.n == 1:
            return keep_x
        my = np.abs(np.fft.fftfreq(self.M, 1.0 / self.M))
        return (my <= cut)[:, None] & keep_x[None, :]

    def fft(self, u):
        return np.fft.rfftn(u, axes=tuple(range(-self.n, 0)))

    def ifft(self, uh):
        return np.fft.irfftn(uh, s=self.shape, axes=tuple(range(-self.n, 0)))


@dataclass
class FieldState:
    """Field ``u(t, x)`` (or perturbation ``v`` for linearised runs).

    ``values`` has shape ``(N, M)`` or ``(N, M, M)``; ``t0`` is the orbit phase
    the run was started from, so the reference state is ``u_*(t0 + t)``.
    """

    t: float
    values: np.ndarray
    grid: Grid
    model: object
    t0: float = 0.0
    linear: bool = False

    def copy(self):
        return replace(self, values=self.values.copy())


@dataclass(frozen=True)
class PerturbationSpec:
    shape: str = "gaussian-bump"
    amplitude: float = 1e-2
    width: float = 2.0
    direction: tuple = (0.0, 1.0)
    center: tuple = (0.0,)
    mode: tuple = (1,)
    file: Optional[str] = None

    def __post_init__(self):
        if self.shape not in ("gaussian-bump", "fourier-mode", "file"):
            raise ValueError(f"unknown perturbation shape {self.shape!r}")
        if self.shape == "file" and not self.file:
            raise ValueError("file perturbation needs a path")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    t_end: float = 500.0
    record_every: float = 1.0
    snapshot_times: tuple = (25.0, 50.0, 100.0, 200.0, 400.0)
    scheme: str = "strang"
    dealias: bool = True

    def __post_init__(self):
        if not self.dt > 0 or not self.t_end > 0:
            raise ValueError("dt and t_end must be positive")
        if self.scheme not in ("strang", "lie"):
            raise ValueError(f"unknown splitting scheme {self.scheme!r}")
        if not self.record_every > 0:
            raise ValueError("record_every must be positive")


def perturbation_field(pert: PerturbationSpec, grid: Grid, N: int) -> np.ndarray:
    if pert.shape == "file":
        header, data = read_snapshot(pert.file)
        if header["M"] != grid.M or header["n"] != grid.n or header["N"] != N:
            raise ValueError("snapshot file does not match the grid")
        return data
    w = np.asarray(pert.direction, dtype=float)
    if w.shape != (N,):
        raise ValueError(f"direction must have {N} components")
    w = w / np.linalg.norm(w)
    if pert.shape == "gaussian-bump":
        if pert.width > grid.L / 8:
            raise PerturbationTooWide(
                f"width {pert.width} exceeds L/8 = {grid.L / 8}; boundary contamination")
        prof = np.exp(-grid.radius(pert.center) ** 2 / (2 * pert.width**2))
    else:
        modes = np.broadcast_to(np.asarray(pert.mode, dtype=float), (grid.n,))
        phase = sum(math.pi * m / grid.L * xi for m, xi in zip(modes, grid.coords()))
        prof = np.cos(phase)
    return pert.amplitude * w.reshape((N,) + (1,) * grid.n) * prof


def norms(v: np.ndarray, grid: Grid):
    """``(L1, L2, Linf)`` of the pointwise Euclidean norm of ``v``."""
    mag = np.sqrt(np.sum(v * v, axis=0))
    dV = grid.cell_volume
    return float(np.sum(mag) * dV), float(math.sqrt(np.sum(mag * mag) * dV)), float(np.max(mag))


def x_norm(v: np.ndarray, grid: Grid) -> float:
    l1, _, linf = norms(v, grid)
    return l1 + linf


def init_state(orbit, t0, pert: PerturbationSpec, grid: Grid, model, linear=False) -> FieldState:
    N = orbit.dimension
    v0 = perturbation_field(pert, grid, N)
    if linear:
        return FieldState(0.0, np.array(v0, dtype=float), grid, model, float(t0), True)
    base = orbit.at(t0).reshape((N,) + (1,) * grid.n)
    u = np.ascontiguousarray(base + v0)
    return FieldState(0.0, u, grid, model, float(t0), False)


@lru_cache(maxsize=32)
def _propagator(grid: Grid, D: tuple, tau: float, dealias: bool):
    Dm = np.array(D)
    k2 = grid.k_squared()
    E = expm(-(k2[..., None, None] * tau) * Dm)
    if dealias:
        E = E * grid.dealias_mask()[..., None, None]
    E = np.ascontiguousarray(np.moveaxis(E, (-2, -1), (0, 1)))
    E.setflags(write=False)
    return E


def _matrix_key(D):
    m = np.asarray(getattr(D, "matrix", D), dtype=float)
    return tuple(map(tuple, m))


def diffuse(u, grid, D, tau, dealias=True):
    """Exact diffusion substep. ``D`` is used as given (``D = 0`` is allowed here)."""
    E = _propagator(grid, _matrix_key(D), float(tau), bool(dealias))
    uh = grid.fft(u)
    uh = np.einsum("ij...,j...->i...", E, uh)
    return np.ascontiguousarray(grid.ifft(uh))


def _rk4_generic(f, u, h):
    k1 = f(u)
    k2 = f(u + 0.5 * h * k1)
    k3 = f(u + 0.5 * h * k2)
    k4 = f(u + h * k3)
    return u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def react(state: FieldState, h: float, orbit=None):
    """Pointwise reaction substep of length ``h`` starting at ``state.t``."""
    model = state.model
    u = state.values
    N = u.shape[0]
    flat = u.reshape(N, -1)
    if state.linear:
        ts = state.t0 + state.t
        A1 = model.jac(orbit.at(ts))
        A2 = model.jac(orbit.at(ts + 0.5 * h))
        A3 = model.jac(orbit.at(ts + h))
        k1 = A1 @ flat
        k2 = A2 @ (flat + 0.5 * h * k1)
        k3 = A2 @ (flat + 0.5 * h * k2)
        k4 = A3 @ (flat + h * k3)
        flat += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    elif model.example is not None and N == 2:
        p = model.example
        _kernels.reaction_rk4_example(flat, h, p.epsilon, math.cos(p.theta),
                                      math.sin(p.theta), 1)
    else:
        flat[...] = _rk4_generic(model.f, flat, h)
    return state


def step(state: FieldState, dt: float, D, scheme="strang", orbit=None, dealias=True) -> FieldState:
    """Advance ``state`` in place by one splitting step and return it.

    Linearised states need ``orbit`` to evaluate ``f'(u_*(t))``.
    """
    if state.linear and orbit is None:
        raise ValueError("linearised stepping needs the orbit")
    if scheme == "strang":
        react(state, 0.5 * dt, orbit)
        state.t += 0.5 * dt
        state.values = diffuse(state.values, state.grid, D, dt, dealias)
        react(state, 0.5 * dt, orbit)
        state.t += 0.5 * dt
    elif scheme == "lie":
        react(state, dt, orbit)
        state.values = diffuse(state.values, state.grid, D, dt, dealias)
        state.t += dt
    else:
        raise ValueError(f"unknown splitting scheme {scheme!r}")
    big = np.max(np.abs(state.values))
    if not big < BLOWUP_LEVEL:
        raise BlowUp(state.t)
    return state


@dataclass
class RunResult:
    times: np.ndarray
    l1: np.ndarray
    l2: np.ndarray
    linf: np.ndarray
    phase_mass: np.ndarray
    drift: np.ndarray
    snapshots: dict = field(default_factory=dict)
    final: Optional[FieldState] = None
    blowup_time: Optional[float] = None

    def series(self, name):
        return getattr(self, name)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "l1", "l2", "linf", "phase_mass"])
            for row in zip(self.times, self.l1, self.l2, self.linf, self.phase_mass):
                w.writerow([repr(float(x)) for x in row])


def perturbation(state: FieldState, orbit) -> np.ndarray:
    if state.linear:
        return state.values
    ref = orbit.at(state.t0 + state.t)
    return state.values - ref.reshape((-1,) + (1,) * state.grid.n)


def _record(state, orbit, adjoint, rows):
    v = perturbation(state, orbit)
    l1, l2, linf = norms(v, state.grid)
    if adjoint is not None:
        U = adjoint.at(state.t0 + state.t)
        alpha = np.tensordot(U, v, axes=1)
        mass = float(np.sum(alpha) * state.grid.cell_volume)
        far = v[(slice(None),) + (0,) * state.grid.n]
        drift = float(U @ far)
    else:
        mass, drift = math.nan, math.nan
    rows.append((state.t, l1, l2, linf, mass, drift))


def _run(state, config, D, orbit, adjoint, check_stable):
    if check_stable is not None and not check_stable:
        warnings.warn("running parameters whose Floquet verdict is not Stable", stacklevel=3)
    dt = config.dt
    nsteps = int(round(config.t_end / dt))
    rec_stride = max(1, int(round(config.record_every / dt)))
    snap_steps = {int(round(ts / dt)): ts for ts in config.snapshot_times if ts <= config.t_end}
    state = state.copy()
    start = state.t
    rows = []
    snaps = {}
    _record(state, orbit, adjoint, rows)
    blow = None
    try:
        for i in range(1, nsteps + 1):
            step(state, dt, D, config.scheme, orbit, config.dealias)
            state.t = start + i * dt
            if i % rec_stride == 0 or i == nsteps:
                _record(state, orbit, adjoint, rows)
            if i in snap_steps:
                snaps[snap_steps[i]] = state.copy()
    except BlowUp as exc:
        blow = exc.t
        err = exc
    arr = np.array(rows, dtype=float)
    result = RunResult(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], arr[:, 5],
                       snaps, state, blow)
    if blow is not None:
        err.result = result
        raise err
    return result


def run(state: FieldState, config: SimConfig, D, orbit, adjoint=None, stable=None) -> RunResult:
    """Integrate the full system and record norms of ``v = u - u_*(t0 + t)``.

    ``stable`` is the Floquet verdict flag; a warning (not an error) is issued
    when it is False. On blow-up the partial result is attached to the
    :class:`BlowUp` exception as ``.result``.
    """
    if state.linear:
        raise ValueError("use linearized_run for linear states")
    return _run(state, config, D, orbit, adjoint, stable)


def linearized_run(state: FieldState, config: SimConfig, D, orbit, adjoint=None,
                   stable=None) -> RunResult:
    if not state.linear:
        N = state.values.shape[0]
        v = perturbation(state, orbit)
        state = FieldState(state.t, np.ascontiguousarray(v), state.grid, state.model,
                           state.t0, True)
        assert v.shape[0] == N
    return _run(state, config, D, orbit, adjoint, stable)


def write_snapshot(path, values: np.ndarray, grid: Grid, t: float):
    values = np.asarray(values, dtype="<f8")
    N = values.shape[0]
    if values.shape != (N,) + grid.shape:
        raise ValueError("array shape does not match the grid")
    with open(path, "wb") as fh:
        fh.write(_SNAP_HEADER.pack(SNAP_MAGIC, grid.n, N, grid.M, float(grid.L), float(t)))
        fh.write(np.ascontiguousarray(values).tobytes(order="C"))


def read_snapshot(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, n, N, M, L, t = _SNAP_HEADER.unpack_from(raw, 0)
    if magic != SNAP_MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    data = np.frombuffer(raw, dtype="<f8", offset=_SNAP_HEADER.size)
    data = data.reshape((N,) + (M,) * n).astype(float)
    return {"n": n, "N": N, "M": M, "L": L, "t": t}, data


def mode_coefficient(values: np.ndarray, grid: Grid, mode) -> np.ndarray:
    """Complex Fourier coefficient of ``exp(i k x)`` for integer mode number(s)."""
    uh = np.fft.fftn(values, axes=tuple(range(-grid.n, 0))) / grid.M**grid.n
    idx = tuple(int(m) % grid.M for m in np.broadcast_to(np.asarray(mode), (grid.n,)))
    return uh[(slice(None),) + idx]
