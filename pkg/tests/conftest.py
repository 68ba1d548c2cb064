import numpy as np
import pytest
from hypothesis import strategies as st

from ntcons.fileio import load_graph, load_schedule
from ntcons.graph import MatrixGraph

THETA = np.array([1.0, 2.0, -1.0])


def random_definite(rng, d, sign, semidefinite=False):
    """Random symmetric matrix of the given sign, built as sign * (Q Q^T + eps I)."""
    Q = rng.normal(size=(d, d))
    if semidefinite and d > 1:
        Q[:, 0] = 0.0
    eps = 0.0 if semidefinite else 0.1
    return sign * (Q @ Q.T + eps * np.eye(d))


def random_graph(rng, n, d, p_edge=0.5, p_neg=0.3):
    """Admissible graph with strictly definite weights and random signs."""
    edges = {}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j and rng.random() < p_edge:
                edges[(i, j)] = random_definite(rng, d, -1 if rng.random() < p_neg else 1)
    return MatrixGraph.from_edges(n, d, edges)


@st.composite
def graphs(draw, max_n=6, max_d=3):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(2, max_n))
    d = draw(st.integers(1, max_d))
    return random_graph(np.random.default_rng(seed), n, d)


def symmetric_matrices(max_n=6):
    return st.integers(1, max_n).flatmap(
        lambda n: st.integers(0, 2**32 - 1).map(
            lambda s: (lambda a: a + a.T)(np.random.default_rng(s).normal(size=(n, n)))
        )
    )


@pytest.fixture(scope="session")
def g1():
    return load_graph("bundled:g1")


@pytest.fixture(scope="session")
def g2():
    return load_graph("bundled:g2")


@pytest.fixture(scope="session")
def g3():
    return load_graph("bundled:g3")


@pytest.fixture(scope="session")
def fixed_schedule():
    return load_schedule("bundled:fixed_g1")


@pytest.fixture(scope="session")
def switching_schedule():
    return load_schedule("bundled:switching")


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results, key=lambda k: (int(str(k).rstrip("ci")), str(k))):
            terminalreporter.write_line(results[key])
