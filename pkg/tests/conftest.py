import numpy as np
import pytest

from kernel_eiv.kernel import Hyperparameters
from kernel_eiv.model import Dataset

ACCEPTANCE_LINES: list[str] = []


def random_dataset(rng, N, frac_u=0.0, frac_y=0.0):
    """Random full-length signals with the given fractions removed."""
    u = rng.standard_normal(N)
    y = rng.standard_normal(N)
    mu = np.ones(N, bool)
    my = np.ones(N, bool)
    mu[rng.choice(N, int(frac_u * N), replace=False)] = False
    my[rng.choice(N, int(frac_y * N), replace=False)] = False
    return Dataset.from_arrays(u, y, mu, my)


def random_hyper(rng):
    return Hyperparameters(float(rng.uniform(0.5, 5.0)), float(rng.uniform(0.3, 0.9)))


def random_moments_matrix(rng, n):
    """Random symmetric PSD second-moment matrix ``P + m m^T``."""
    X = rng.standard_normal((n, n))
    m = rng.standard_normal(n)
    return X @ X.T / n + np.outer(m, m)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def record_acceptance(line: str) -> None:
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
