import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tree_ising.core import rng
from tree_ising.graphs import Graph, random_labeled_tree

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_trees(count, n_min=2, n_max=14, seed=0):
    gen = rng(seed, "test_random_trees")
    return [random_labeled_tree(int(gen.integers(n_min, n_max + 1)), gen) for _ in range(count)]


def petersen() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return Graph.from_edges(10, outer + spokes + inner)


@pytest.fixture
def edge_graph():
    return Graph.from_edges(2, [(0, 1)])


@pytest.fixture
def triangle():
    return Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


# -- acceptance summary -----------------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def report(number: int, title: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
