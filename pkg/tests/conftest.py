import numpy as np
import pytest

from avgcons.graph import laplacian, path_graph, complete_graph, random_graph_suite
from avgcons.harness import appendix_a_graph

SUITE_SEED = 20240601

_ACCEPTANCE: list[tuple[int, bool, str]] = []


@pytest.fixture(scope="session")
def suite():
    """The shared family of 100 connected random graphs."""
    return random_graph_suite(100, SUITE_SEED)


@pytest.fixture(scope="session")
def appendix():
    return appendix_a_graph()


@pytest.fixture
def p3():
    return path_graph(3)


@pytest.fixture
def k3():
    return complete_graph(3)


@pytest.fixture
def lap_p3(p3):
    return laplacian(p3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def acceptance():
    """Record one acceptance line; the summary is printed at the end of the run."""

    def record(number: int, passed: bool, detail: str):
        line = (number, bool(passed), detail)
        _ACCEPTANCE.append(line)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'} | {detail}")
