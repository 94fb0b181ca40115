import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from simplex_ot.graph import random_connected_graph, random_density, triangle_graph, two_point_graph

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def instance(seed: int, n_max: int = 8, n_min: int = 2):
    """Random connected graph and interior density from one integer seed."""
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, int(rng.integers(n_min, n_max + 1)))
    return rng, g, random_density(rng, g.n)


@pytest.fixture
def two():
    return two_point_graph(2.0)


@pytest.fixture
def tri():
    return triangle_graph()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
