import numpy as np
import pytest
from hypothesis import settings

from emforecast.config import bundled_snapshot
from emforecast.pipeline import prepare
from emforecast.series import Dataset, read_csv

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture(scope="session")
def snapshot():
    return read_csv(bundled_snapshot())


@pytest.fixture(scope="session")
def prepared(snapshot):
    return prepare(snapshot)


def random_dataset(seed: int, n: int = 56, k: int = 3, start: int = 1967) -> Dataset:
    """Stationary VAR(1)-ish data with a target that depends on lagged features."""
    gen = np.random.default_rng(seed)
    m = np.zeros((n, k + 1))
    for t in range(1, n):
        m[t, 1:] = 0.4 * m[t - 1, 1:] + gen.normal(size=k)
        m[t, 0] = 0.3 * m[t - 1, 0] + 0.5 * m[t - 1, 1] - 0.3 * m[t - 1, 2] + 0.2 * gen.normal()
    names = ("co2_per_capita",) + tuple(f"f{j}" for j in range(k))
    return Dataset.from_matrix(names, start, m)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
