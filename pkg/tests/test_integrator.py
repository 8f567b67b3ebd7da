import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from floquet_rd import _pykernels
from floquet_rd._dopri import dopri5
from floquet_rd._kernels import available_backends
from floquet_rd.flow import flow, variational_flow
from floquet_rd.kinetics import ExampleParams, make_example_model, model_from_function

cython = available_backends().get("cython")
needs_ext = pytest.mark.skipif(cython is None, reason="compiled extension not built")


def test_harmonic_oscillator_period():
    y, n, _ = dopri5(lambda t, y: np.array([y[1], -y[0]]), 0.0, 2 * math.pi, np.array([1.0, 0.0]))
    assert np.allclose(y, [1.0, 0.0], atol=1e-9)
    assert n > 0


def _forced_exact(t):
    # y' = -y/2 + sin t, y(0) = 2
    part = (0.5 * math.sin(t) - math.cos(t)) / 1.25
    return part + (2.0 + 1.0 / 1.25) * math.exp(-0.5 * t)


def test_forced_decay_both_directions():
    rhs = lambda t, y: np.array([-0.5 * y[0] + math.sin(t)])
    y1, _, _ = dopri5(rhs, 0.0, 3.0, np.array([2.0]))
    assert abs(y1[0] - _forced_exact(3.0)) < 1e-9
    y0, _, _ = dopri5(rhs, 3.0, 0.0, np.array([_forced_exact(3.0)]))
    assert abs(y0[0] - 2.0) < 1e-8


def test_exponential_growth():
    y, _, _ = dopri5(lambda t, y: 1.3 * y, 0.0, 2.0, np.array([1.0]))
    assert math.isclose(y[0], math.exp(2.6), rel_tol=1e-9)


def test_generic_flow_matches_kernel():
    p = ExampleParams(0.6, 0.4)
    fast = make_example_model(p)
    slow = model_from_function(fast.f, 2, jac=fast.jac)
    u0 = np.array([0.3, 0.2])
    assert np.allclose(flow(fast, u0, 0.0, 5.0), flow(slow, u0, 0.0, 5.0), atol=1e-9)
    a = variational_flow(fast, u0, 0.0, 2.0, np.eye(2), 0.3)
    b = variational_flow(slow, u0, 0.0, 2.0, np.eye(2), 0.3)
    assert np.allclose(a[1], b[1], atol=1e-9)


@needs_ext
@given(st.floats(0.2, 1.0), st.floats(-1.2, 1.2), st.floats(-1, 1), st.floats(-1, 1),
       st.floats(0.0, 2.0), st.booleans())
def test_backends_agree_on_flow(eps, theta, a, b, k, var):
    c, s = math.cos(theta), math.sin(theta)
    D = np.array([[1.0, 0.3], [0.1, 0.7]])
    y0 = np.array([a, b] + ([1.0, 0.0, 0.0, 1.0] if var else []))
    args = (0.0, 3.0, eps, c, s, D, k * k, 0.1, var, 1e-10, 1e-12, 0.0, 100000)
    yp, np_, _ = _pykernels.dopri_example(y0, *args)
    yc, nc, _ = cython.dopri_example(y0, *args)
    assert np_ == nc
    assert np.allclose(yp, yc, rtol=1e-12, atol=1e-13)


@needs_ext
@given(st.floats(0.2, 1.0), st.floats(-1.2, 1.2), st.floats(1e-3, 0.1))
def test_backends_agree_on_reaction(eps, theta, h):
    rng = np.random.default_rng(0)
    u = rng.normal(size=(2, 64))
    up, uc = u.copy(), u.copy()
    _pykernels.reaction_rk4_example(up, h, eps, math.cos(theta), math.sin(theta), 3)
    cython.reaction_rk4_example(uc, h, eps, math.cos(theta), math.sin(theta), 3)
    assert np.allclose(up, uc, rtol=1e-13, atol=1e-15)


def test_python_fallback_end_to_end():
    import os
    import subprocess
    import sys

    code = (
        "import math, numpy as np\n"
        "from floquet_rd import _kernels\n"
        "from floquet_rd.kinetics import ExampleParams, make_example_model\n"
        "from floquet_rd.orbit import find_orbit\n"
        "from floquet_rd.floquet import monodromy, floquet_exponents\n"
        "assert _kernels.BACKEND == 'python'\n"
        "m = make_example_model(ExampleParams(0.5, 0.3))\n"
        "o = find_orbit(m, [0.45, 0.0], 6.0, samples=64)\n"
        "lam = floquet_exponents(monodromy(m, o, np.eye(2), 0.0), o.period)\n"
        "print(abs(lam[1] - m.oracles.lambda2))\n"
    )
    env = dict(os.environ, FLOQUET_RD_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert float(out.stdout) < 1e-8
