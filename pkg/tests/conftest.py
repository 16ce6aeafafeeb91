import numpy as np
import pytest
import scipy.sparse as sp

from birank.graph import from_matrix

_acceptance = []


def random_graph(rng, u, p, density=0.3, connected_rows=False):
    """Random weighted bipartite graph; weights uniform on [0.1, 5)."""
    mask = rng.random((u, p)) <= density
    if connected_rows:
        # one guaranteed edge per row and per column
        mask[np.arange(u), rng.integers(0, p, u)] = True
        mask[rng.integers(0, u, p), np.arange(p)] = True
    W = np.where(mask, rng.uniform(0.1, 5.0, (u, p)), 0.0)
    return from_matrix(sp.csr_matrix(W))


def random_priors(rng, u, p):
    p0 = rng.random(p)
    u0 = rng.random(u)
    return p0 / p0.sum(), u0 / u0.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
