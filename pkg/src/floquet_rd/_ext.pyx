# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the planar example kinetics.

Mirrors ``_pykernels``: same Dormand-Prince tableau, same step controller,
same RK4 reaction step. Inner loops run without the GIL.
"""

import numpy as np
from libc.math cimport sqrt, fabs, pow, fmax, fmin

from .errors import IntegratorFailure

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40

cdef double SAFETY = 0.9
cdef double FAC_MIN = 0.2
cdef double FAC_MAX = 5.0


cdef struct Params:
    double eps2
    double c
    double s
    double L00, L01, L10, L11
    int var


cdef inline void rhs(Params* p, double* y, double* out) noexcept nogil:
    cdef double u1 = y[0], u2 = y[1]
    cdef double g = p.eps2 - u1 * u1 - u2 * u2
    cdef double ru1, ru2, a00, a01, a10, a11
    out[0] = -u2 + g * (p.c * u1 - p.s * u2)
    out[1] = u1 + g * (p.s * u1 + p.c * u2)
    if not p.var:
        return
    ru1 = p.c * u1 - p.s * u2
    ru2 = p.s * u1 + p.c * u2
    a00 = p.L00 + g * p.c - 2.0 * ru1 * u1
    a01 = p.L01 - 1.0 - g * p.s - 2.0 * ru1 * u2
    a10 = p.L10 + 1.0 + g * p.s - 2.0 * ru2 * u1
    a11 = p.L11 + g * p.c - 2.0 * ru2 * u2
    out[2] = a00 * y[2] + a01 * y[4]
    out[3] = a00 * y[3] + a01 * y[5]
    out[4] = a10 * y[2] + a11 * y[4]
    out[5] = a10 * y[3] + a11 * y[5]


cdef inline double rms(double* x, int n) noexcept nogil:
    cdef double acc = 0.0
    cdef int i
    for i in range(n):
        acc += x[i] * x[i]
    return sqrt(acc / n)


cdef double initial_step(Params* p, double* y0, double* f0, int n,
                         double rtol, double atol) noexcept nogil:
    cdef double sc[6]
    cdef double tmp[6]
    cdef double y1[6]
    cdef double f1[6]
    cdef double d0, d1, d2, h0, h1
    cdef int i
    for i in range(n):
        sc[i] = atol + rtol * fabs(y0[i])
        tmp[i] = y0[i] / sc[i]
    d0 = rms(tmp, n)
    for i in range(n):
        tmp[i] = f0[i] / sc[i]
    d1 = rms(tmp, n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    for i in range(n):
        y1[i] = y0[i] + h0 * f0[i]
    rhs(p, y1, f1)
    for i in range(n):
        tmp[i] = (f1[i] - f0[i]) / sc[i]
    d2 = rms(tmp, n) / h0
    if fmax(d1, d2) <= 1e-15:
        h1 = fmax(1e-6, h0 * 1e-3)
    else:
        h1 = pow(0.01 / fmax(d1, d2), 0.2)
    return fmin(100.0 * h0, h1)


def dopri_example(y0, double t0, double t1, double eps, double c, double s, D,
                  double k2, double shift, bint variational,
                  double rtol, double atol, double h0, long max_steps):
    """Dormand-Prince 5(4) flow of the example kinetics, optionally with its
    variational matrix ``F' = (-k2 D + f'(u) + shift I) F`` (row-major)."""
    cdef double[::1] yin = np.array(y0, dtype=np.float64).ravel()
    cdef double[::1] Dm = np.array(D, dtype=np.float64).ravel()
    cdef int n = 6 if variational else 2
    if yin.shape[0] != n:
        raise ValueError(f"state must have length {n}")
    if t1 <= t0:
        if t1 == t0:
            return np.asarray(yin).copy(), 0, h0
        raise ValueError("compiled kernel integrates forward in time only")
    cdef Params p
    p.eps2 = eps * eps
    p.c = c
    p.s = s
    p.L00 = -k2 * Dm[0] + shift
    p.L01 = -k2 * Dm[1]
    p.L10 = -k2 * Dm[2]
    p.L11 = -k2 * Dm[3] + shift
    p.var = variational

    cdef double y[6]
    cdef double yn[6]
    cdef double ys[6]
    cdef double k1[6]
    cdef double k2v[6]
    cdef double k3[6]
    cdef double k4[6]
    cdef double k5[6]
    cdef double k6[6]
    cdef double k7[6]
    cdef double ev[6]
    cdef double t = t0, h, hs, h_full = 0.0, remaining, err, fac, sc
    cdef long nsteps = 0
    cdef int i, status = 0
    cdef bint last, rejected = False

    for i in range(n):
        y[i] = yin[i]
    with nogil:
        rhs(&p, y, k1)
        if h0 != 0.0:
            h = fabs(h0)
        else:
            h = initial_step(&p, y, k1, n, rtol, atol)
        while True:
            remaining = t1 - t
            if remaining <= 0.0:
                break
            last = h >= remaining
            if last:
                h_full = h
                h = remaining
            if h < 1e-14 * fmax(1.0, fabs(t)):
                status = 1
                break
            hs = h
            for i in range(n):
                ys[i] = y[i] + hs * (A21 * k1[i])
            rhs(&p, ys, k2v)
            for i in range(n):
                ys[i] = y[i] + hs * (A31 * k1[i] + A32 * k2v[i])
            rhs(&p, ys, k3)
            for i in range(n):
                ys[i] = y[i] + hs * (A41 * k1[i] + A42 * k2v[i] + A43 * k3[i])
            rhs(&p, ys, k4)
            for i in range(n):
                ys[i] = y[i] + hs * (A51 * k1[i] + A52 * k2v[i] + A53 * k3[i] + A54 * k4[i])
            rhs(&p, ys, k5)
            for i in range(n):
                ys[i] = y[i] + hs * (A61 * k1[i] + A62 * k2v[i] + A63 * k3[i]
                                     + A64 * k4[i] + A65 * k5[i])
            rhs(&p, ys, k6)
            for i in range(n):
                yn[i] = y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i]
                                     + B5 * k5[i] + B6 * k6[i])
            rhs(&p, yn, k7)
            for i in range(n):
                sc = atol + rtol * fmax(fabs(y[i]), fabs(yn[i]))
                ev[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                              + E6 * k6[i] + E7 * k7[i]) / sc
            err = rms(ev, n)
            if err <= 1.0:
                if last:
                    t = t1
                else:
                    t = t + hs
                for i in range(n):
                    y[i] = yn[i]
                    k1[i] = k7[i]
                nsteps += 1
                if nsteps > max_steps:
                    status = 2
                    break
                if err == 0.0:
                    fac = FAC_MAX
                else:
                    fac = fmin(FAC_MAX, fmax(FAC_MIN, SAFETY * pow(err, -0.2)))
                if rejected:
                    fac = fmin(fac, 1.0)
                rejected = False
                if last:
                    h = fmax(h, h_full)
                else:
                    h = h * fac
            else:
                h = h * fmax(FAC_MIN, SAFETY * pow(err, -0.2))
                rejected = True
    if status == 1:
        raise IntegratorFailure(f"step size underflow at t = {t:.6g}")
    if status == 2:
        raise IntegratorFailure(f"exceeded {max_steps} steps")
    out = np.empty(n)
    for i in range(n):
        out[i] = y[i]
    return out, nsteps, h


cdef inline void fpoint(double eps2, double c, double s, double a, double b,
                        double* fa, double* fb) noexcept nogil:
    cdef double g = eps2 - a * a - b * b
    fa[0] = -b + g * (c * a - s * b)
    fb[0] = a + g * (s * a + c * b)


def reaction_rk4_example(double[:, ::1] u, double h, double eps, double c, double s, int nsub):
    """Advance ``u`` (shape ``(2, P)``) in place by ``nsub`` RK4 steps of size ``h``."""
    cdef Py_ssize_t P = u.shape[1], j
    cdef int it
    cdef double eps2 = eps * eps
    cdef double a, b, ka1, kb1, ka2, kb2, ka3, kb3, ka4, kb4
    cdef double hh = 0.5 * h, h6 = h / 6.0
    with nogil:
        for j in range(P):
            a = u[0, j]
            b = u[1, j]
            for it in range(nsub):
                fpoint(eps2, c, s, a, b, &ka1, &kb1)
                fpoint(eps2, c, s, a + hh * ka1, b + hh * kb1, &ka2, &kb2)
                fpoint(eps2, c, s, a + hh * ka2, b + hh * kb2, &ka3, &kb3)
                fpoint(eps2, c, s, a + h * ka3, b + h * kb3, &ka4, &kb4)
                a = a + h6 * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4)
                b = b + h6 * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4)
            u[0, j] = a
            u[1, j] = b
    return np.asarray(u)
