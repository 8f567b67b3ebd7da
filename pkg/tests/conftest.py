import math

import numpy as np
import pytest
from hypothesis import settings

from floquet_rd.kinetics import DiffusionMatrix, ExampleParams, make_example_model
from floquet_rd.orbit import find_orbit

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")


def build(epsilon, theta, D):
    p = ExampleParams(epsilon, theta, DiffusionMatrix(np.asarray(D, dtype=float)))
    model = make_example_model(p)
    orbit = find_orbit(model, [0.9 * epsilon, 0.0], 2 * math.pi)
    return model, p.D, orbit


@pytest.fixture(scope="session")
def stable_case():
    return build(0.5, 0.0, np.eye(2))


@pytest.fixture(scope="session")
def tilted_case():
    return build(0.5, 0.3, np.diag([1.0, 0.5]))


@pytest.fixture(scope="session")
def sideband_case():
    return build(0.5, 0.9, [[2.0, 3.0], [0.5, 1.0]])


@pytest.fixture(scope="session")
def turing_case():
    return build(0.05, 0.0, [[4.0, -6.0], [0.1, 1.0]])


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
