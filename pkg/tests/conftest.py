import numpy as np
import pytest

from graphfission import Graph, NodeSignal, grid_graph


@pytest.fixture
def path3():
    return Graph(node_count=3, edges=[(0, 1), (1, 2)])


@pytest.fixture
def grid10():
    return grid_graph(10, 10)


def make_piecewise_signal(n, n_levels, rng, sigma=1.0, jump=3.0):
    """Piecewise-constant mean over contiguous index blocks plus noise."""
    levels = rng.uniform(-jump, jump, n_levels)
    mu = np.repeat(levels, -(-n // n_levels))[:n]
    return NodeSignal(values=mu + sigma * rng.standard_normal(n)), mu
