import numpy as np
import pytest
from hypothesis import strategies as st


@st.composite
def edge_lists(draw, max_n=12, max_m=40, weighted=True):
    """Random (n, edges) with edges as (u, v, w) tuples; may contain
    duplicates and self-loops, which builders are expected to handle."""
    n = draw(st.integers(min_value=1, max_value=max_n))
    m = draw(st.integers(min_value=0, max_value=max_m))
    vertex = st.integers(min_value=0, max_value=n - 1)
    if weighted:
        weight = st.floats(min_value=0.0, max_value=8.0, allow_nan=False)
        edge = st.tuples(vertex, vertex, weight)
    else:
        edge = st.tuples(vertex, vertex)
    edges = draw(st.lists(edge, min_size=m, max_size=m))
    return n, edges


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
