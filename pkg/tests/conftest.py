import numpy as np
import pytest

from sdrkit.linalg import DataSet


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def axis(d, *idx):
    """Orthonormal basis of coordinate axes ``idx`` in R^d."""
    return np.eye(d)[:, list(idx)]


def max_angle(U, V):
    from sdrkit.linalg import principal_angles, orthonormalize
    return float(principal_angles(orthonormalize(U), orthonormalize(V))[-1])


def linear_data(n=1000, d=5, sigma=0.0, seed=0):
    r = np.random.default_rng(seed)
    X = r.standard_normal((d, n))
    return DataSet(X, X[0] + sigma * r.standard_normal(n))


def assert_orthonormal(U, tol=1e-10):
    U = np.asarray(U)
    assert np.abs(U.T @ U - np.eye(U.shape[1])).max() < tol
