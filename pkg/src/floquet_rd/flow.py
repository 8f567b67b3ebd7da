"""Kinetics flow and variational flow, dispatching to the compiled core.

Orbit and monodromy work share the tolerances below (absolute 1e-12,
relative 1e-10): multipliers near one need a tight flow.
"""

import math

import numpy as np

from . import _kernels
from ._dopri import dopri5

RTOL = 1e-10
ATOL = 1e-12
MAX_STEPS = 2_000_000


def _example_args(model):
    p = model.example
    return p.epsilon, math.cos(p.theta), math.sin(p.theta)


def _use_kernel(model, t0, t1):
    return model.example is not None and t1 >= t0


def flow(model, u0, t0, t1, rtol=RTOL, atol=ATOL, h0=0.0, return_step=False):
    """Solution of ``u' = f(u)`` at ``t1`` starting from ``u0`` at ``t0``."""
    u0 = np.asarray(u0, dtype=float)
    if _use_kernel(model, t0, t1):
        eps, c, s = _example_args(model)
        u1, _, h = _kernels.dopri_example(u0, t0, t1, eps, c, s, np.eye(2), 0.0, 0.0,
                                          False, rtol, atol, h0, MAX_STEPS)
    else:
        f = model.f
        u1, _, h = dopri5(lambda t, y: np.asarray(f(y), dtype=float), t0, t1, u0,
                          rtol=rtol, atol=atol, h0=h0, max_steps=MAX_STEPS)
    return (u1, h) if return_step else u1


def variational_flow(model, u0, t0, t1, D=None, k2=0.0, shift=0.0,
                     rtol=RTOL, atol=ATOL, h0=0.0, return_step=False):
    """Flow of ``u`` together with ``F' = (-k2 D + f'(u) + shift I) F``, ``F(t0) = I``.

    Returns ``(u(t1), F(t1))``; ``shift`` rescales ``F`` by ``exp(shift (t1 - t0))``
    and keeps strongly damped modes representable.
    """
    u0 = np.asarray(u0, dtype=float)
    N = u0.size
    Dm = np.zeros((N, N)) if D is None else np.asarray(getattr(D, "matrix", D), dtype=float)
    y0 = np.concatenate([u0, np.eye(N).ravel()])
    if _use_kernel(model, t0, t1):
        eps, c, s = _example_args(model)
        y1, _, h = _kernels.dopri_example(y0, t0, t1, eps, c, s, Dm, k2, shift,
                                          True, rtol, atol, h0, MAX_STEPS)
    else:
        f, jac = model.f, model.jac
        L = -k2 * Dm + shift * np.eye(N)

        def rhs(t, y):
            u = y[:N]
            F = y[N:].reshape(N, N)
            return np.concatenate([np.asarray(f(u), dtype=float),
                                   ((L + jac(u)) @ F).ravel()])

        y1, _, h = dopri5(rhs, t0, t1, y0, rtol=rtol, atol=atol, h0=h0,
                          max_steps=MAX_STEPS)
    out = (y1[:N], y1[N:].reshape(N, N))
    return (*out, h) if return_step else out
