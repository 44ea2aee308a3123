import numpy as np
import pytest

from mwh.rng import RngStream


@pytest.fixture
def stream():
    return RngStream(1234)


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240601)


def random_simplex_rows(rng, n, k):
    x = rng.random((n, k)) + 1e-3
    return x / x.sum(axis=1, keepdims=True)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
