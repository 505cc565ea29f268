import numpy as np
import pytest

from imbbench.dataset import LabeledDataset

FIXTURES = __import__("pathlib").Path(__file__).parent / "fixtures"


def make_dataset(X, y):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return LabeledDataset(X, np.asarray(y, dtype=np.int64))


def random_dataset(rng, n_maj, n_min, dim=2, shift=1.5):
    X = np.vstack([rng.standard_normal((n_maj, dim)),
                   rng.standard_normal((n_min, dim)) + shift])
    y = np.r_[np.zeros(n_maj, np.int64), np.ones(n_min, np.int64)]
    perm = rng.permutation(len(y))
    return LabeledDataset(X[perm], y[perm])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for entry in results.values():
        secs = entry["seconds"]
        within = secs is not None and secs < entry["limit"]
        status = "PASS" if entry["ok"] and within else "FAIL"
        timing = "n/a" if secs is None else f"{secs:.2f}s / limit {entry['limit']:g}s"
        tr.write_line(f"{status}  {entry['title']}  [{timing}]  {entry['detail']}")
