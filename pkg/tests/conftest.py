import numpy as np
import pytest

from gridlodf.model import Bus, Line, Network


def make_network(bus_spec, line_spec):
    """bus_spec: [(id, p, slack?)], line_spec: [(tail, head, x)]."""
    buses = tuple(
        Bus(id=b[0], injection=b[1], is_slack=(len(b) > 2 and b[2]))
        for b in bus_spec
    )
    lines = tuple(
        Line.from_reactance(k, t, h, x) for k, (t, h, x) in enumerate(line_spec)
    )
    return Network(buses=buses, lines=lines)


@pytest.fixture
def triangle():
    return make_network(
        [(1, 1.0), (2, -1.0), (3, 0.0, True)],
        [(1, 2, 1.0), (1, 3, 1.0), (3, 2, 1.0)],
    )


@pytest.fixture
def path3():
    return make_network(
        [(1, 1.0), (2, 0.0), (3, -1.0, True)],
        [(1, 2, 1.0), (2, 3, 1.0)],
    )


@pytest.fixture
def butterfly():
    # Two triangles sharing the center bus 3.
    return make_network(
        [(1, 0.5), (2, 0.25), (3, 0.0, True), (4, -0.25), (5, -0.5)],
        [(1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0),
         (3, 4, 1.0), (3, 5, 1.0), (4, 5, 1.0)],
    )


@pytest.fixture
def two_triangles_bridge():
    # Triangles {1,2,3} and {4,5,6} joined by the bridge 3-4 (line id 3).
    return make_network(
        [(1, 1.0), (2, 0.5), (3, 0.0, True), (4, 0.0), (5, -0.5), (6, -1.0)],
        [(1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0),
         (3, 4, 1.0),
         (4, 5, 1.0), (4, 6, 1.0), (5, 6, 1.0)],
    )


@pytest.fixture
def k4():
    return make_network(
        [(1, 0.0), (2, 0.0), (3, 0.0), (4, 0.0, True)],
        [(1, 2, 1.0), (1, 3, 1.0), (1, 4, 1.0),
         (2, 3, 1.0), (2, 4, 1.0), (3, 4, 1.0)],
    )


@pytest.fixture
def parallel_pair():
    return make_network(
        [(1, 1.0), (2, -1.0, True)],
        [(1, 2, 1.0), (1, 2, 1.0)],
    )
