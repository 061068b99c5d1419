import numpy as np
import pytest

from markovswarm import build_moore_grid


def random_support(rng, M, density=0.3):
    """Random strongly connected support with self-loops (random cycle + extra edges)."""
    E = rng.random((M, M)) < density
    order = rng.permutation(M)
    E[order, np.roll(order, -1)] = True
    np.fill_diagonal(E, True)
    return E


def random_irreducible(rng, M, density=0.3):
    E = random_support(rng, M, density)
    W = np.where(E, rng.random((M, M)) + 0.05, 0.0)
    return W / W.sum(axis=1, keepdims=True)


def random_target(rng, M):
    t = rng.random(M) + 0.01
    return t / t.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def paper_grid():
    return build_moore_grid(5, 7)


TWO_STATE_P = np.array([[0.5, 0.5], [0.5, 0.5]])
TWO_STATE_TARGET = np.array([0.25, 0.75])
TWO_STATE_P_STAR = np.array([[0.625, 0.375], [0.125, 0.875]])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
