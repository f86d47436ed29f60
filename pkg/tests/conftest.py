import numpy as np
import pytest

from pfrd.graph import SparseGraph

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_graph(rng: np.random.Generator, n: int, p: float, weighted: bool = False) -> SparseGraph:
    a = np.triu(rng.random((n, n)) < p, 1)
    w = np.triu(rng.uniform(0.1, 1.0, (n, n)), 1) if weighted else np.ones((n, n))
    m = np.where(a, w, 0.0)
    return SparseGraph.from_dense(m + m.T)


@pytest.fixture
def path3():
    return SparseGraph.from_edges(3, [0, 1], [1, 2])


@pytest.fixture
def k3():
    return SparseGraph.from_edges(3, [0, 0, 1], [1, 2, 2])


@pytest.fixture
def k4_pendant():
    return SparseGraph.from_edges(5, [0, 0, 0, 1, 1, 2, 3], [1, 2, 3, 2, 3, 3, 4])
