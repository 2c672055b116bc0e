from pathlib import Path

import numpy as np
import pytest

from swboost.dataio import Dataset, load_libsvm

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def iris():
    return load_libsvm(DATA_DIR / "iris.libsvm")


@pytest.fixture(scope="session")
def digits4():
    return load_libsvm(DATA_DIR / "digits4.libsvm")


def random_dataset(rng, m, d, k, distinct=None):
    """Random features with every class present; ``distinct`` limits values per column."""
    X = rng.normal(size=(m, d))
    if distinct is not None:
        X = rng.integers(0, distinct, size=(m, d)).astype(float)
    labels = np.concatenate([np.arange(1, k + 1), rng.integers(1, k + 1, size=m - k)])
    return Dataset(X, rng.permutation(labels), k)


def binary_dataset(seed, m=100, d=10):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(m, d))
    score = X[:, 0] + 0.5 * X[:, 1] ** 2 + rng.normal(scale=0.5, size=m)
    return Dataset(X, np.where(score > 0.5, 1, 2), 2)


def brute_force_best_edge(X, v):
    """Largest edge over every feature, midpoint threshold, polarity and class, by enumeration."""
    best = -np.inf
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        thresholds = np.r_[vals[0] - 1.0, (vals[:-1] + vals[1:]) / 2.0]
        for thr in thresholds:
            for polarity in (1, -1):
                out = np.where(X[:, f] > thr, polarity, -polarity)
                for r in range(v.shape[1]):
                    best = max(best, float(np.sum(v[:, r] * out)))
    return best


# -- acceptance summary ------------------------------------------------------

ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture
def record_criterion():
    def record(number: int, title: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_RESULTS[number] = (title, passed, detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}: {detail}")
