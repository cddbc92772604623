import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@st.composite
def graphs(draw, min_nodes=2, max_nodes=14, connected=False):
    """``(n, edges)`` with edges as sorted ``u < v`` pairs."""
    n = draw(st.integers(min_nodes, max_nodes))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    if connected:
        # a random spanning path keeps every instance connected
        order = draw(st.permutations(range(n)))
        chosen = sorted(set(chosen) | {tuple(sorted((order[i], order[i + 1]))) for i in range(n - 1)})
    return n, sorted(chosen)


def random_graph(rng, n, p, connected=False):
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    edges = set(zip(iu[keep].tolist(), ju[keep].tolist()))
    if connected:
        perm = rng.permutation(n)
        edges |= {tuple(sorted((int(perm[i]), int(perm[i + 1])))) for i in range(n - 1)}
    return sorted(edges)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
