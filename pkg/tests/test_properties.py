"""Hypothesis property checks across modules."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from sdrkit.inverse import dr_fit, save_fit, sir_fit
from sdrkit.io import BasisFile
from sdrkit.kdr import double_center, gram, hsic, KernelSpec, project_psd_trace
from sdrkit.linalg import (
    DataSet,
    orthonormal_complement,
    principal_angles,
    random_orthonormal,
    sym_eig,
    sym_inv_sqrt,
)
from sdrkit.manifold import qr_retract, tangent_project
from sdrkit.slicing import make_slices, slice_stats
from sdrkit.synthetic import subspace_error

SETTINGS = settings(max_examples=40, deadline=None,
                    suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(0, 2 ** 32 - 1)


@st.composite
def dims(draw, dmax=8):
    d = draw(st.integers(2, dmax))
    p = draw(st.integers(1, d - 1))
    return d, p


@SETTINGS
@given(dims(), seeds)
def test_principal_angles_symmetric_bounded(dp, seed):
    d, p = dp
    r = np.random.default_rng(seed)
    U, V = random_orthonormal(d, p, r), random_orthonormal(d, p, r)
    a, b = principal_angles(U, V), principal_angles(V, U)
    np.testing.assert_allclose(a, b, atol=1e-10)
    assert np.all(a >= 0) and np.all(a <= np.pi / 2 + 1e-12)
    assert np.all(np.diff(a) >= -1e-12)
    cos = np.linalg.svd(U.T @ V, compute_uv=False)
    np.testing.assert_allclose(np.sort(np.cos(a)), np.sort(cos), atol=1e-8)


@SETTINGS
@given(dims(), seeds)
def test_projection_distance_identity(dp, seed):
    d, p = dp
    r = np.random.default_rng(seed)
    U, V = random_orthonormal(d, p, r), random_orthonormal(d, p, r)
    _, pf = subspace_error(U, V)
    theta = principal_angles(U, V)
    assert abs(2 * pf ** 2 - 2 * np.sum(np.sin(theta) ** 2)) < 1e-10


@SETTINGS
@given(dims(), seeds)
def test_projection_idempotent_and_complement(dp, seed):
    d, p = dp
    U = random_orthonormal(d, p, np.random.default_rng(seed))
    P = U @ U.T
    np.testing.assert_allclose(P @ P, P, atol=1e-12)
    C = orthonormal_complement(U)
    np.testing.assert_allclose(C.T @ C, np.eye(d - p), atol=1e-10)
    np.testing.assert_allclose(U.T @ C, 0, atol=1e-10)
    np.testing.assert_allclose(P + C @ C.T, np.eye(d), atol=1e-10)


@SETTINGS
@given(dims(), seeds)
def test_retraction_stays_on_manifold(dp, seed):
    d, p = dp
    r = np.random.default_rng(seed)
    U = random_orthonormal(d, p, r)
    T = tangent_project(U, r.standard_normal((d, p)))
    sym = U.T @ T
    np.testing.assert_allclose(sym + sym.T, 0, atol=1e-10)
    W = qr_retract(U, T, 0.7)
    np.testing.assert_allclose(W.T @ W, np.eye(p), atol=1e-10)


@SETTINGS
@given(st.integers(1, 6), seeds)
def test_sym_eig_reconstructs(d, seed):
    r = np.random.default_rng(seed)
    A = r.standard_normal((d, d))
    A = A + A.T
    lam, V = sym_eig(A)
    assert np.all(np.diff(lam) <= 1e-12)
    np.testing.assert_allclose(V @ np.diag(lam) @ V.T, A, atol=1e-9)
    S = A @ A.T + np.eye(d)
    W = sym_inv_sqrt(S)
    np.testing.assert_allclose(W @ S @ W, np.eye(d), atol=1e-8)


@SETTINGS
@given(st.integers(10, 120), st.integers(1, 12), seeds)
def test_slices_partition_and_total_variance(n, h, seed):
    r = np.random.default_rng(seed)
    y = r.standard_normal(n)
    sl = make_slices(y, min(h, n // 2))
    a = np.asarray(sl.assignments)
    assert a.shape == (n,) and set(a.tolist()) == set(range(sl.h))
    np.testing.assert_allclose(sl.proportions, np.bincount(a, minlength=sl.h) / n)
    assert abs(sl.proportions.sum() - 1) < 1e-12
    Z = r.standard_normal((3, n))
    ss = slice_stats(Z, sl)
    mu = Z.mean(axis=1)
    total = (Z - mu[:, None]) @ (Z - mu[:, None]).T / n
    between = sum(w * np.outer(m - mu, m - mu) for w, m in zip(ss.proportions, ss.means))
    within = sum(w * C for w, C in zip(ss.proportions, ss.covariances))
    np.testing.assert_allclose(between + within, total, atol=1e-10)


@SETTINGS
@given(st.integers(3, 40), st.sampled_from(["linear", "gaussian"]), seeds)
def test_kernel_psd_and_centering(n, kind, seed):
    X = np.random.default_rng(seed).standard_normal((2, n))
    K = gram(X, KernelSpec(kind)).K
    np.testing.assert_allclose(K, K.T, atol=1e-12)
    assert np.linalg.eigvalsh(K).min() > -1e-9 * max(1.0, np.abs(K).max())
    Kc = double_center(gram(X, KernelSpec(kind))).K
    np.testing.assert_allclose(Kc.sum(axis=0), 0, atol=1e-9 * max(1.0, np.abs(K).max()))
    assert hsic(Kc, Kc) >= -1e-12


@SETTINGS
@given(st.integers(1, 6), seeds)
def test_psd_trace_projection(n, seed):
    r = np.random.default_rng(seed)
    A = r.standard_normal((n, n))
    P = project_psd_trace(A + A.T)
    assert abs(np.trace(P) - 1) < 1e-10
    assert np.linalg.eigvalsh(P).min() > -1e-12
    np.testing.assert_allclose(project_psd_trace(P), P, atol=1e-10)


@SETTINGS
@given(st.sampled_from([sir_fit, save_fit, dr_fit]), st.integers(1, 2), seeds)
def test_inverse_estimators_orthonormal(fit, p, seed):
    r = np.random.default_rng(seed)
    X = r.standard_normal((4, 150))
    est = fit(DataSet(X, X[0] + X[1] ** 2 + 0.1 * r.standard_normal(150)), p, h=5)
    assert est.U.shape == (4, p)
    np.testing.assert_allclose(est.U.T @ est.U, np.eye(p), atol=1e-10)


@SETTINGS
@given(dims(), seeds)
def test_basis_file_roundtrip(dp, seed):
    d, p = dp
    U = random_orthonormal(d, p, np.random.default_rng(seed))
    assert np.array_equal(BasisFile.loads(BasisFile(U, "m").dumps()).basis, U)
