import numpy as np
import pytest

from hdsi.dataset import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def make_dataset(X, y, targets=None, names=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    p = X.shape[1]
    names = names or [f"x{j + 1}" for j in range(p)]
    return Dataset(y=y, X=X, column_names=names, target_index=range(p) if targets is None else targets)


def orthonormal_design(n, p, rng):
    """Centered columns with E_n[x_j x_k] = 1{j = k}."""
    Z = rng.standard_normal((n, p))
    Z -= Z.mean(axis=0)
    # orthogonalize against the constant as well: QR of [1, Z]
    Q, _ = np.linalg.qr(np.column_stack([np.ones(n), Z]))
    return Q[:, 1:] * np.sqrt(n)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
