import numpy as np
import pytest
from hypothesis import settings

from airfl.airlink import GradientStats, NoiseParams
from airfl.channel import FadingParams, Geometry, PathLossParams, draw_node_positions, generate_channels

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")

SERVER = (-50.0, 0.0, 10.0)
RIS = (0.0, 0.0, 10.0)
REGION = ((0.0, 20.0), (-10.0, 10.0), 0.0)


def desk_instance(seed, num_nodes=5, num_antennas=4, num_elements=16):
    """Reference-geometry channel draw plus gradient statistics of realistic scale."""
    rng = np.random.default_rng(seed)
    geom = Geometry(SERVER, RIS, draw_node_positions(num_nodes, REGION, rng))
    ch = generate_channels(geom, PathLossParams(), FadingParams(), num_antennas, num_elements, rng)
    stats = GradientStats(np.zeros(num_nodes), rng.uniform(0.005, 0.02, num_nodes), np.full(num_nodes, 400))
    return ch, stats


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def noise():
    return NoiseParams(sigma_a_sq=1e-8, sigma_e_sq=1e-8)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
