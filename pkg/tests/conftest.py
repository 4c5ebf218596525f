import numpy as np
import pytest

from graphite.graph import build_graph


def fig1_graph():
    """Five nodes; v1, v2 carry feature 0 and v3..v5 carry feature 1."""
    edges = [(0, 2), (0, 3), (1, 2), (1, 4), (2, 3)]
    feats = [{0}, {0}, {1}, {1}, {1}]
    return build_graph(edges, feats, np.array([0, 0, 1, 1, 1]), num_nodes=5, num_classes=2, num_features=2)


@pytest.fixture
def fig1():
    return fig1_graph()


def random_small_graph(rng, max_nodes=50, max_features=12, num_classes=3, p_edge=None):
    n = int(rng.integers(3, max_nodes + 1))
    f = int(rng.integers(1, max_features + 1))
    p = p_edge if p_edge is not None else float(rng.uniform(0.05, 0.4))
    upper = np.triu(rng.random((n, n)) < p, 1)
    edges = np.argwhere(upper)
    if len(edges) == 0:
        edges = np.array([[0, 1]])
    x = (rng.random((n, f)) < rng.uniform(0.1, 0.5)).astype(float)
    labels = rng.integers(0, num_classes, n)
    return build_graph(edges, x, labels, num_nodes=n, num_classes=num_classes, num_features=f)


# -- acceptance reporting -----------------------------------------------------

_CRITERIA: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        num, title = mark.args
        status = "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL"
        _CRITERIA[num] = f"{status} criterion {num:>2}: {title}"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[num])
