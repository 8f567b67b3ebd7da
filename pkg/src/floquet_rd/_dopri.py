"""Dormand-Prince 5(4) integrator with step-size control.

Pure NumPy reference; the compiled core mirrors this step for step, so the
two backends differ only in floating-point evaluation order.
"""

import math

import numpy as np

from .errors import IntegratorFailure

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# 5th minus embedded 4th order weights
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920,
                          -17253 / 339200, 22 / 525, -1 / 40)

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0


def _rms(x):
    return math.sqrt(float(np.dot(x, x)) / x.size)


def initial_step(rhs, t0, y0, f0, direction, rtol, atol):
    """Hairer-Wanner starting step estimate for a fifth order method."""
    scale = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = rhs(t0 + direction * h0, y1)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1)


def dopri5(rhs, t0, t1, y0, rtol=1e-10, atol=1e-12, h0=0.0, max_steps=1_000_000):
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1``.

    Returns ``(y1, nsteps, h_last)``. ``h_last`` is the last proposed step and
    can seed the next call when integrating over consecutive intervals.
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    t1 = float(t1)
    if t1 == t:
        return y, 0, h0
    direction = 1.0 if t1 > t else -1.0
    k1 = rhs(t, y)
    h = abs(h0) if h0 else initial_step(rhs, t, y, k1, direction, rtol, atol)
    nsteps = 0
    rejected = False
    while True:
        remaining = (t1 - t) * direction
        if remaining <= 0.0:
            break
        last = h >= remaining
        if last:
            h_full = h
            h = remaining
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegratorFailure(f"step size underflow at t = {t:.6g}")
        hs = direction * h
        k2 = rhs(t + C2 * hs, y + hs * (A21 * k1))
        k3 = rhs(t + C3 * hs, y + hs * (A31 * k1 + A32 * k2))
        k4 = rhs(t + C4 * hs, y + hs * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = rhs(t + C5 * hs, y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = rhs(t + hs, y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        y_new = y + hs * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = rhs(t + hs, y_new)
        err_vec = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(err_vec / scale)
        if err <= 1.0:
            t = t1 if last else t + hs
            y = y_new
            k1 = k7
            nsteps += 1
            if nsteps > max_steps:
                raise IntegratorFailure(f"exceeded {max_steps} steps")
            fac = FAC_MAX if err == 0.0 else min(FAC_MAX, max(FAC_MIN, SAFETY * err ** -0.2))
            if rejected:
                fac = min(fac, 1.0)
            rejected = False
            if last:
                h = max(h, h_full)
            else:
                h = h * fac
        else:
            h = h * max(FAC_MIN, SAFETY * err ** -0.2)
            rejected = True
    return y, nsteps, h
