import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def dense_circulant(c):
    """Independent oracle: build A[i, j] = c[(j - i) % n] entry by entry."""
    n = len(c)
    A = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            A[i, j] = c[(j - i) % n]
    return A


def rel_err(a, b):
    scale = max(np.linalg.norm(b), np.finfo(float).tiny)
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / scale


ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
