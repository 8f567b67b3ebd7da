"""Reaction kinetics, diffusion matrices and the planar rotating example.

The example system is

    u_t = D u_xx + J u + (eps^2 - |u|^2) R u,

with ``J`` the quarter rotation and ``R`` the rotation by ``theta``. Its
homogeneous oscillation, adjoint, decay rate and phase-diffusion constant are
all known in closed form, which makes it the reference model for every
numerical check in the toolkit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

J_MATRIX = np.array([[0.0, -1.0], [1.0, 0.0]])


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class DiffusionMatrix:
    """Cross-diffusion matrix ``D``.

    Admissibility only requires eigenvalues with positive real part, which
    keeps ``u_t = D u_xx`` well posed. The two stronger conditions used in the
    stability theory are recorded as flags: ``symmetric_positive`` for
    ``D = D^T > 0`` and ``coercive`` for ``D + D^T > 0``.
    """

    matrix: np.ndarray

    def __post_init__(self):
        D = np.array(self.matrix, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError(f"diffusion matrix must be square, got shape {D.shape}")
        if not np.all(np.isfinite(D)):
            raise ValueError("diffusion matrix has non-finite entries")
        if np.min(np.linalg.eigvals(D).real) <= 0.0:
            raise ValueError("diffusion matrix needs eigenvalues with positive real part")
        D.setflags(write=False)
        object.__setattr__(self, "matrix", D)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def coercive(self) -> bool:
        sym = 0.5 * (self.matrix + self.matrix.T)
        return bool(np.min(np.linalg.eigvalsh(sym)) > 0.0)

    @property
    def symmetric_positive(self) -> bool:
        return bool(np.array_equal(self.matrix, self.matrix.T) and self.coercive)

    @property
    def hypothesis(self) -> str:
        """Strongest hypothesis satisfied: 'symmetric', 'coercive' or 'spectral'."""
        if self.symmetric_positive:
            return "symmetric"
        if self.coercive:
            return "coercive"
        return "spectral"

    @property
    def min_real_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvals(self.matrix).real))

    def scaled(self, c: float) -> "DiffusionMatrix":
        return DiffusionMatrix(c * self.matrix)

    def as_tuple(self):
        return tuple(tuple(float(x) for x in row) for row in self.matrix)


def as_diffusion(D) -> DiffusionMatrix:
    if isinstance(D, DiffusionMatrix):
        return D
    return DiffusionMatrix(np.asarray(D, dtype=float))


@dataclass(frozen=True)
class ExampleParams:
    epsilon: float
    theta: float
    D: DiffusionMatrix = field(default_factory=lambda: DiffusionMatrix(np.eye(2)))

    def __post_init__(self):
        if not (self.epsilon > 0.0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not (-math.pi / 2 < self.theta < math.pi / 2):
            raise ValueError(f"theta must lie in (-pi/2, pi/2), got {self.theta}")
        D = as_diffusion(self.D)
        if D.dimension != 2:
            raise ValueError("the example system needs a 2x2 diffusion matrix")
        object.__setattr__(self, "D", D)


@dataclass(frozen=True)
class ExampleOracles:
    """Closed-form quantities of the example system."""

    epsilon: float
    theta: float
    R: np.ndarray
    lambda2: float
    d0: float
    turing_indicator: float
    sideband_indicator: float
    tr_jd: float
    det_d: float
    period: float = 2 * math.pi

    def orbit(self, t):
        t = np.asarray(t, dtype=float)
        return self.epsilon * np.stack([np.cos(t), np.sin(t)], axis=0)

    def orbit_derivative(self, t):
        t = np.asarray(t, dtype=float)
        return self.epsilon * np.stack([-np.sin(t), np.cos(t)], axis=0)

    def adjoint(self, t):
        """Unnormalised bounded adjoint ``R (-sin t, cos t)``."""
        t = np.asarray(t, dtype=float)
        return np.tensordot(self.R, np.stack([-np.sin(t), np.cos(t)], axis=0), axes=1)

    def normalized_adjoint(self, t):
        return self.adjoint(t) / (self.epsilon * math.cos(self.theta))

    def turing_interval(self) -> Optional[tuple]:
        """Open interval of k^2 where ``1 + Tr(JD) k^2 + Det(D) k^4 < 0``."""
        a, b = self.det_d, self.tr_jd
        disc = b * b - 4.0 * a
        if a <= 0.0 or disc <= 0.0 or b >= 0.0:
            return None
        r = math.sqrt(disc)
        return ((-b - r) / (2 * a), (-b + r) / (2 * a))


@dataclass(frozen=True)
class KineticsModel:
    """Kinetics ``f`` with Jacobian ``jac``.

    ``f`` acts on arrays of shape ``(N, ...)`` componentwise along the first
    axis so the same callable serves the ODE and the pointwise reaction step.
    ``jac`` takes a single state of shape ``(N,)``.
    """

    dimension: int
    f: Callable
    jac: Callable
    name: str = "custom"
    oracles: Optional[ExampleOracles] = None
    example: Optional[ExampleParams] = None
    analytic_jacobian: bool = True

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("a nontrivial periodic orbit needs N >= 2")
        if self.dimension > 16:
            raise ValueError("dense Floquet analysis is limited to N <= 16")


def example_oracles(params: ExampleParams) -> ExampleOracles:
    eps, th = params.epsilon, params.theta
    D = params.D.matrix
    R = rotation(th)
    tr_jd = float(np.trace(J_MATRIX @ D))
    det_d = float(np.linalg.det(D))
    tr_d = float(np.trace(D))
    return ExampleOracles(
        epsilon=eps,
        theta=th,
        R=R,
        lambda2=-eps**2 * float(np.trace(R)),
        d0=0.5 * (tr_d - math.tan(th) * tr_jd),
        turing_indicator=tr_jd + 2.0 * math.sqrt(det_d) if det_d >= 0 else -math.inf,
        sideband_indicator=tr_d - math.tan(th) * tr_jd,
        tr_jd=tr_jd,
        det_d=det_d,
    )


def make_example_model(params: ExampleParams) -> KineticsModel:
    eps2 = params.epsilon**2
    R = rotation(params.theta)

    def f(u):
        u = np.asarray(u, dtype=float)
        r2 = u[0] * u[0] + u[1] * u[1]
        g = eps2 - r2
        return np.stack([
            -u[1] + g * (R[0, 0] * u[0] + R[0, 1] * u[1]),
            u[0] + g * (R[1, 0] * u[0] + R[1, 1] * u[1]),
        ], axis=0)

    def jac(u):
        u = np.asarray(u, dtype=float)
        return J_MATRIX + (eps2 - u @ u) * R - 2.0 * np.outer(R @ u, u)

    return KineticsModel(2, f, jac, name="example",
                         oracles=example_oracles(params), example=params)


def eval_jacobian(model: KineticsModel, u) -> np.ndarray:
    return np.asarray(model.jac(np.asarray(u, dtype=float)), dtype=float)


def fd_jacobian(f, u, rel_step=1e-6):
    """Central-difference Jacobian. Accurate to roughly ``rel_step**2``."""
    u = np.asarray(u, dtype=float)
    n = u.size
    out = np.empty((n, n))
    for j in range(n):
        h = rel_step * max(1.0, abs(u[j]))
        e = np.zeros(n)
        e[j] = h
        out[:, j] = (np.asarray(f(u + e)) - np.asarray(f(u - e))) / (2 * h)
    return out


def model_from_function(f, dimension, name="custom", jac=None):
    """Wrap a kinetics callable; without ``jac`` central differences are used."""
    if jac is None:
        return KineticsModel(dimension, f, lambda u: fd_jacobian(f, u), name=name,
                             analytic_jacobian=False)
    return KineticsModel(dimension, f, jac, name=name)


def scaled_model(model: KineticsModel, c: float) -> KineticsModel:
    """Time-rescaled kinetics ``c f``; the example fast path is dropped."""
    f0, j0 = model.f, model.jac
    return KineticsModel(model.dimension, lambda u: c * f0(u), lambda u: c * j0(u),
                         name=f"{model.name}*{c:g}",
                         analytic_jacobian=model.analytic_jacobian)


_REGISTRY: dict = {}


def register_model(name: str, factory: Callable) -> None:
    """Register ``factory(**params) -> (KineticsModel, DiffusionMatrix)`` under ``name``."""
    if name in _REGISTRY:
        raise ValueError(f"model type {name!r} already registered")
    _REGISTRY[name] = factory


def registered_models():
    return sorted(_REGISTRY)


def build_model(type_: str, **params):
    try:
        factory = _REGISTRY[type_]
    except KeyError:
        raise ValueError(f"unknown model type {type_!r}; known: {registered_models()}") from None
    return factory(**params)


def _example_factory(epsilon, theta, D):
    p = ExampleParams(float(epsilon), float(theta), as_diffusion(D))
    return make_example_model(p), p.D


register_model("example", _example_factory)
