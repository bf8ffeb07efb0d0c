import random

import pytest

from mugnn.formula import parse, well_name
from mugnn.graph import make_graph


@pytest.fixture
def g1():
    # path 0 -> 1 -> 2, p at node 2, q at nodes 0 and 2
    return make_graph(
        ["p", "q"],
        ["0", "1", "2"],
        [["q"], [], ["p", "q"]],
        [(0, 1), (1, 2)],
    )


@pytest.fixture
def phi_reach():
    return well_name(parse("mu X.(p | <>X)"))


@pytest.fixture
def rng():
    return random.Random(12345)
