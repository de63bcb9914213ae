import numpy as np
import pytest

from sparsecc.model import Dataset


def logistic_dataset(seed, n, M, beta=None, intercept=0.0):
    """Balanced dataset: prospective draws, first n of each class kept."""
    rng = np.random.default_rng(seed)
    if beta is None:
        beta = np.zeros(M)
        beta[: min(3, M)] = 1.0
    X, y = [], []
    got = [0, 0]
    while min(got) < n:
        x = rng.standard_normal((4 * n, M))
        p = 1 / (1 + np.exp(-(intercept + x @ beta)))
        lab = (rng.random(4 * n) < p).astype(int)
        for xi, li in zip(x, lab):
            if got[li] < n:
                X.append(xi)
                y.append(li)
                got[li] += 1
    return Dataset.from_arrays(np.array(X), np.array(y))


@pytest.fixture
def make_data():
    return logistic_dataset


@pytest.fixture
def small_data():
    return logistic_dataset(0, 100, 10)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[num])
