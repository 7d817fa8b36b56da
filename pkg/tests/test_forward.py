import numpy as np
import pytest

from sdrkit.errors import BandwidthError, InvalidInputError
from sdrkit.forward import (
    CveObjective,
    bandwidth,
    cve_fit,
    local_linear_fits,
    mave_fit,
    mave_objective,
    phd_fit,
)
from sdrkit.inverse import sir_fit
from sdrkit.linalg import DataSet, standardize
from sdrkit.manifold import OptConfig, numerical_gradient

from conftest import assert_orthonormal, axis, max_angle


def _data(link, n, d, sigma, seed):
    r = np.random.default_rng(seed)
    X = r.standard_normal((d, n))
    return DataSet(X, link(X) + sigma * r.standard_normal(n))


# ---------------------------------------------------------------- pHd


def test_phd_quadratic():
    est = phd_fit(_data(lambda X: X[0] ** 2 - 1, 4000, 6, 0.0, 1), 1)
    assert max_angle(est.U, axis(6, 0)) < 0.1
    assert not est.warnings


def test_phd_blind_to_linear_trend():
    est = phd_fit(_data(lambda X: X[0], 2000, 5, 0.0, 2), 1)
    assert any("degenerate candidate matrix" in w for w in est.warnings)


def test_phd_one_dimensional():
    est = phd_fit(_data(lambda X: X[0] ** 2, 100, 1, 0.1, 3), 1)
    assert np.allclose(np.abs(est.U), 1.0)


def test_phd_eigen_residual():
    est = phd_fit(_data(lambda X: X[0] ** 2 - X[1] ** 2, 500, 4, 0.1, 4), 2)
    S, B = est.diagnostics["Syxx"], est.diagnostics["Sxx"]
    V = est.diagnostics["eigenvectors"]
    for lam, u in zip(est.diagnostics["eigenvalues"], V.T):
        assert np.linalg.norm(S @ u - lam * B @ u) <= 1e-8 * np.linalg.norm(S)


def test_phd_rejects_categorical():
    with pytest.raises(InvalidInputError):
        phd_fit(DataSet(np.random.default_rng(0).standard_normal((2, 10)), np.arange(10) % 2,
                        categorical=True), 1)


# ---------------------------------------------------------------- MAVE


def test_local_linear_weights_sum_to_one():
    r = np.random.default_rng(5)
    T = r.standard_normal((2, 80))
    y = T[0] - 2 * T[1]
    a, B, W = local_linear_fits(T, y, 0.7)
    assert np.abs(W.sum(axis=0) - 1).max() < 1e-10 and W.min() >= 0
    # exact linear response: every local slope is the global one
    assert np.allclose(B, np.array([[1.0], [-2.0]]), atol=1e-8)


def test_mave_exact_linear_model():
    r = np.random.default_rng(6)
    u0 = np.linalg.qr(r.standard_normal((4, 1)))[0]
    X = r.standard_normal((4, 300))
    data = DataSet(X, (u0.T @ X)[0])
    est = mave_fit(data, 1)
    assert est.diagnostics["objective"] <= 1e-12
    assert max_angle(est.U, u0) < 1e-4


def test_mave_sine_model():
    est = mave_fit(_data(lambda X: np.sin(2 * X[0]), 1500, 5, 0.1, 7), 1)
    assert max_angle(est.U, axis(5, 0)) < 0.15


def test_mave_zero_iterations_returns_warm_start():
    data = _data(lambda X: X[0] + X[1] ** 2, 400, 4, 0.1, 8)
    est = mave_fit(data, 1, max_iter=0)
    assert max_angle(est.U, sir_fit(data, 1).U) < 1e-10


def test_mave_monotone_and_orthonormal():
    est = mave_fit(_data(lambda X: X[0] + 0.5 * X[1] ** 2, 600, 5, 0.2, 9), 2)
    tr = est.diagnostics["trace"]
    assert all(b <= a for a, b in zip(tr, tr[1:]))
    assert_orthonormal(est.U)


def test_mave_objective_consistent():
    data = _data(lambda X: X[0], 200, 3, 0.3, 10)
    est = mave_fit(data, 1, max_iter=3)
    std = standardize(data)
    W = est.diagnostics["W_standardized"]
    h = est.diagnostics["bandwidth"]
    assert np.isclose(mave_objective(W, std.Z, data.y - data.y.mean(), h), est.diagnostics["objective"])


def test_mave_opg_start_handles_symmetric_link():
    est = mave_fit(_data(lambda X: X[0] ** 2, 1500, 5, 0.1, 11), 1, init="opg")
    assert max_angle(est.U, axis(5, 0)) < 0.1
    with pytest.raises(InvalidInputError):
        mave_fit(_data(lambda X: X[0], 50, 2, 0.1, 0), 1, init="magic")


def test_bandwidth_rule():
    T = np.array([[0.0, 1.0, 3.0]])
    # median pairwise distance 2, n^{-1/5}
    assert np.isclose(bandwidth(T), 2.0 * 3 ** (-0.2))
    with pytest.raises(BandwidthError):
        bandwidth(np.zeros((1, 5)))


# ---------------------------------------------------------------- CVE


def test_cve_constant_labels():
    r = np.random.default_rng(12)
    est = cve_fit(DataSet(r.standard_normal((3, 50)), np.full(50, 2.0)), 1)
    assert any("zero-variance labels" in w for w in est.warnings)
    assert est.diagnostics["objective"] == 0.0


def test_cve_linear_model():
    est = cve_fit(_data(lambda X: X[0], 1000, 3, 0.1, 13), 1)
    assert max_angle(est.U, axis(3, 0)) < 0.15


def test_cve_complement_consistency():
    est = cve_fit(_data(lambda X: X[0] + X[1], 300, 4, 0.1, 14), 1)
    V = est.diagnostics["state"].V
    assert_orthonormal(V)
    W = np.linalg.qr(np.linalg.solve(standardize(_data(lambda X: X[0] + X[1], 300, 4, 0.1, 14)).whiten,
                                     est.U))[0]
    assert np.abs(W.T @ V).max() < 1e-10


def test_cve_grid_oracle_d2():
    data = _data(lambda X: X[0] - 0.5 * X[1], 300, 2, 0.3, 15)
    est = cve_fit(data, 1, opt_cfg=OptConfig(max_iter=500, grad_tol=1e-10))
    std = standardize(data)
    obj = CveObjective(std.Z, data.y, est.diagnostics["bandwidth"])
    grid = min(obj(np.array([[np.cos(t)], [np.sin(t)]])) for t in np.arange(0, np.pi, 0.001))
    assert est.diagnostics["objective"] <= grid + 1e-6


def test_cve_local_variances_nonnegative_and_gradient():
    r = np.random.default_rng(16)
    X = r.standard_normal((4, 120))
    y = X[0] + 0.2 * r.standard_normal(120)
    obj = CveObjective(X, y, 0.8)
    for _ in range(5):
        V = np.linalg.qr(r.standard_normal((4, 3)))[0]
        assert obj.local(V).min() >= 0 and obj(V) >= 0
        g = obj.gradient(V)
        num = numerical_gradient(obj, V)
        assert np.linalg.norm(g - num) / np.linalg.norm(num) < 1e-5


def test_cve_bandwidth_underflow():
    r = np.random.default_rng(17)
    X = r.standard_normal((3, 40))
    with pytest.raises(BandwidthError):
        cve_fit(DataSet(X, X[0]), 1, bandwidth_scale=1e-6)


def test_cve_rejects_degenerate_bandwidth():
    with pytest.raises(BandwidthError):
        CveObjective(np.eye(2), np.arange(2.0), 1e-200)


def test_cve_requires_n_greater_than_d():
    with pytest.raises(InvalidInputError):
        cve_fit(DataSet(np.eye(3), np.arange(3.0)), 1)
