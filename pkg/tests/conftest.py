import numpy as np
import pytest
from hypothesis import settings

from peergrid.model import ModelInstance, Network, build_topology

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def swap():
    return Network(np.array([[0.0, 1.0], [1.0, 0.0]]))


@pytest.fixture
def i2(swap):
    """Two identical users linked to each other: a=10, b=1, gamma=0.5, c=2."""
    return ModelInstance.build(swap, 10.0, 1.0, 0.5, 2.0)


def random_instance(rng, n, kind=None, gamma_max=0.7, symmetric=False):
    kinds = ["fully_connected", "ring"] if symmetric else ["fully_connected", "ring", "star"]
    if n == 2:
        kinds = ["fully_connected"]
    kind = kind or kinds[rng.integers(len(kinds))]
    net = build_topology(kind, n)
    b = rng.uniform(0.75, 1.25, n)
    gamma = rng.uniform(0.0, gamma_max, n) * np.minimum(1.0, b / gamma_max * 0.99)
    return ModelInstance.build(net, rng.uniform(8, 12, n), b, gamma, rng.uniform(0.5, 3.0, n))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
