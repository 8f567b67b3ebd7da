"""NumPy implementations of the hot kernels (fallback for ``_ext``).

Both kernels are specialised to the planar example kinetics. The signatures
match the compiled module exactly; see ``_kernels`` for backend selection.
"""

import numpy as np

from ._dopri import dopri5


def _example_rhs(eps, c, s, D, k2, shift, variational):
    eps2 = eps * eps
    R = np.array([[c, -s], [s, c]])
    L = -k2 * np.asarray(D, dtype=float).reshape(2, 2) + shift * np.eye(2)

    def rhs(t, y):
        u1, u2 = y[0], y[1]
        g = eps2 - u1 * u1 - u2 * u2
        du = np.array([-u2 + g * (c * u1 - s * u2), u1 + g * (s * u1 + c * u2)])
        if not variational:
            return du
        u = y[:2]
        A = L + np.array([[0.0, -1.0], [1.0, 0.0]]) + g * R - 2.0 * np.outer(R @ u, u)
        dF = A @ y[2:].reshape(2, 2)
        return np.concatenate([du, dF.ravel()])

    return rhs


def dopri_example(y0, t0, t1, eps, c, s, D, k2, shift, variational,
                  rtol, atol, h0, max_steps):
    rhs = _example_rhs(eps, c, s, D, k2, shift, variational)
    y1, nsteps, h = dopri5(rhs, t0, t1, np.asarray(y0, dtype=float),
                           rtol=rtol, atol=atol, h0=h0, max_steps=max_steps)
    return y1, nsteps, h


def _example_f(u, eps2, c, s):
    g = eps2 - (u[0] * u[0] + u[1] * u[1])
    out = np.empty_like(u)
    out[0] = -u[1] + g * (c * u[0] - s * u[1])
    out[1] = u[0] + g * (s * u[0] + c * u[1])
    return out


def reaction_rk4_example(u, h, eps, c, s, nsub):
    """Advance ``u`` (shape ``(2, P)``, C-contiguous) in place by ``nsub`` RK4 steps."""
    eps2 = eps * eps
    for _ in range(nsub):
        k1 = _example_f(u, eps2, c, s)
        k2 = _example_f(u + 0.5 * h * k1, eps2, c, s)
        k3 = _example_f(u + 0.5 * h * k2, eps2, c, s)
        k4 = _example_f(u + h * k3, eps2, c, s)
        u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return u
