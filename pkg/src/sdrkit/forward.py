"""Forward-regression estimators: pHd, MAVE and CVE."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    BandwidthError,
    DegenerateCandidateError,
    InvalidInputError,
    SingularityError,
)
from .inverse import _check_p, sir_fit
from .linalg import (
    DataSet,
    SubspaceEstimate,
    default_ridge,
    generalized_eig,
    map_back,
    orthonormal_complement,
    orthonormalize,
    random_orthonormal,
    sample_covariance,
    standardize,
    sym_eig,
)
from .manifold import OptConfig, run_with_fallback

log = logging.getLogger(__name__)


@dataclass
class LocalLinearFit:
    a: float
    b: np.ndarray
    anchor_index: int
    weights: np.ndarray


@dataclass
class CveState:
    V: np.ndarray
    objective: float
    bandwidth: float


def _require_numeric(data: DataSet, name: str):
    if data.categorical:
        raise InvalidInputError(f"{name} needs continuous labels")


def _sqdist(T: np.ndarray) -> np.ndarray:
    """Pairwise squared distances between the columns of ``T``."""
    sq = np.sum(T * T, axis=0)
    D = sq[:, None] + sq[None, :] - 2.0 * (T.T @ T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def _laplacian_form(X: np.ndarray, G: np.ndarray) -> np.ndarray:
    """``sum_ij G_ij (x_i - x_j)(x_i - x_j)^T`` for columns ``x_i`` of ``X``."""
    r = G.sum(axis=1) + G.sum(axis=0)
    XG = X @ G @ X.T
    return (X * r) @ X.T - XG - XG.T


def bandwidth(T: np.ndarray, scale: float = 1.0, max_points: int = 1000) -> float:
    """``scale * n^{-1/(k+4)} * median pairwise distance`` of the k x n points ``T``."""
    k, n = T.shape
    stride = max(1, n // max_points)
    D = _sqdist(T[:, ::stride])
    iu = np.triu_indices(D.shape[0], 1)
    med = float(np.median(np.sqrt(D[iu])))
    if med <= 0:
        raise BandwidthError("median projected distance is zero; bandwidth undefined")
    return scale * n ** (-1.0 / (k + 4)) * med


# ---------------------------------------------------------------- pHd


def phd_fit(data: DataSet, p: int = 1) -> SubspaceEstimate:
    """Principal Hessian directions, ordered by eigenvalue magnitude."""
    _require_numeric(data, "pHd")
    _check_p(p, data.d)
    X, y = data.X, data.y
    d, n = X.shape
    Xc = X - X.mean(axis=1, keepdims=True)
    yc = y - y.mean()
    Syxx = (Xc * yc) @ Xc.T / n
    Sxx = sample_covariance(X)
    try:
        lam, U = generalized_eig(Syxx, Sxx)
    except SingularityError:
        lam, U = generalized_eig(Syxx, Sxx + default_ridge(Sxx) * np.eye(d))
    est = SubspaceEstimate(U=orthonormalize(U[:, :p]), method="phd",
                           eigenvalues_or_objective=lam[:p])
    noise_level = 4.0 * y.std() * np.sqrt(d / n)
    if d > 1 and np.abs(lam).max() < noise_level:
        est.warnings.append(
            "degenerate candidate matrix: all Hessian eigenvalues are at noise level "
            "(pHd cannot see purely linear trends)")
    est.diagnostics.update(eigenvalues=lam, noise_level=noise_level,
                           Syxx=Syxx, Sxx=Sxx, eigenvectors=U)
    return est


# ---------------------------------------------------------------- MAVE


def local_linear_fits(T: np.ndarray, y: np.ndarray, h: float, ridge: float = 1e-8):
    """Kernel-weighted local linear fits at every anchor.

    ``T`` is the p x n matrix of projected covariates. Returns ``(a, B, W)``:
    intercepts (n,), slopes (p, n) and the weight matrix with ``W[i, j] = w_ij``
    (columns sum to one).
    """
    p, n = T.shape
    K = np.exp(-_sqdist(T) / (2.0 * h * h))
    W = K / K.sum(axis=0, keepdims=True)
    m = T @ W  # (p, n): weighted mean of t around each anchor
    S = np.empty((n, p, p))
    for a_ in range(p):
        for b_ in range(a_, p):
            S[:, a_, b_] = S[:, b_, a_] = (T[a_] * T[b_]) @ W
    dm = m - T
    A = np.empty((n, p + 1, p + 1))
    A[:, 0, 0] = 1.0
    A[:, 0, 1:] = dm.T
    A[:, 1:, 0] = dm.T
    A[:, 1:, 1:] = (S - np.einsum("aj,bj->jab", m, T) - np.einsum("aj,bj->jab", T, m)
                    + np.einsum("aj,bj->jab", T, T))
    ybar = y @ W
    rhs = np.empty((n, p + 1))
    rhs[:, 0] = ybar
    rhs[:, 1:] = ((T * y) @ W - T * ybar).T
    eig_min = np.linalg.eigvalsh(A)[:, 0]
    scale = np.trace(A, axis1=1, axis2=2)
    weak = eig_min < 1e-10 * scale
    if np.any(weak):
        A[weak] += ridge * np.eye(p + 1)
    theta = np.linalg.solve(A, rhs[..., None])[..., 0]
    return theta[:, 0], theta[:, 1:].T, W


def _mave_residuals(T, y, a, B):
    # R[i, j] = y_i - a_j - b_j^T (t_i - t_j)
    c = a - np.sum(B * T, axis=0)
    return y[:, None] - c[None, :] - T.T @ B


def mave_objective(U, Z, y, h) -> float:
    T = U.T @ Z
    a, B, W = local_linear_fits(T, y, h)
    R = _mave_residuals(T, y, a, B)
    return float(np.sum(W * R * R) / Z.shape[1])


def _mave_direction_step(Z, y, a, B, W):
    """Least squares for U with local fits and weights held fixed."""
    d, n = Z.shape
    p = B.shape[0]
    A = np.zeros((d * p, d * p))
    rhs = np.zeros(d * p)
    Rw = W * (y[:, None] - a[None, :])
    for i in range(p):
        Gi = Rw * B[i][None, :]
        rhs[i * d:(i + 1) * d] = Z @ Gi.sum(axis=1) - Z @ Gi.sum(axis=0)
        for k in range(i, p):
            blk = _laplacian_form(Z, W * (B[i] * B[k])[None, :])
            A[i * d:(i + 1) * d, k * d:(k + 1) * d] = blk
            A[k * d:(k + 1) * d, i * d:(i + 1) * d] = blk.T
    A += 1e-12 * np.trace(A) / (d * p) * np.eye(d * p)
    theta = np.linalg.solve(A, rhs)
    return theta.reshape(p, d).T


def opg_directions(Z, y, p: int, bandwidth_scale: float = 1.0) -> np.ndarray:
    """Top-p eigenvectors of the averaged outer product of local slopes."""
    _, B, _ = local_linear_fits(Z, y, bandwidth(Z, bandwidth_scale))
    _, V = sym_eig(B @ B.T / Z.shape[1])
    return V[:, :p]


def mave_fit(data: DataSet, p: int = 1, bandwidth_scale: float = 1.0, max_iter: int = 50,
             tol: float = 1e-7, seed: int = 0, U0: Optional[np.ndarray] = None,
             ridge=None, init: str = "sir") -> SubspaceEstimate:
    """Minimum average variance estimation by alternating least squares.

    Runs on standardized covariates. ``init="sir"`` warm-starts from SIR;
    ``init="opg"`` uses the outer product of full-dimensional local slopes,
    which also sees symmetric links. A cycle whose objective goes up is
    rolled back and ends the iteration.
    """
    _require_numeric(data, "MAVE")
    _check_p(p, data.d)
    d, n = data.d, data.n
    if n <= p + 1:
        raise InvalidInputError("MAVE needs n > p + 1")
    std = standardize(data, ridge)
    Z = std.Z
    y = data.y - data.y.mean()
    warnings = []
    if init not in ("sir", "opg"):
        raise InvalidInputError(f"unknown MAVE init {init!r}")
    if U0 is None and init == "opg":
        U0 = opg_directions(Z, y, p, bandwidth_scale)
        start = "opg"
    elif U0 is None:
        try:
            sir = sir_fit(data, p, ridge=ridge)
            U0 = orthonormalize(_raw_to_std(sir.U, std))
            start = "sir"
        except (DegenerateCandidateError, InvalidInputError):
            U0 = random_orthonormal(d, p, np.random.default_rng(seed))
            start = "random"
    else:
        start = "given"
    U = np.linalg.qr(np.asarray(U0, dtype=float))[0]
    h = bandwidth(U.T @ Z, bandwidth_scale)
    f = mave_objective(U, Z, y, h)
    trace = [f]
    converged = max_iter == 0
    for it in range(max_iter):
        a, B, W = local_linear_fits(U.T @ Z, y, h)
        U_new = np.linalg.qr(_mave_direction_step(Z, y, a, B, W))[0]
        f_new = mave_objective(U_new, Z, y, h)
        if f_new > f:
            warnings.append(f"objective increased at cycle {it + 1}; rolled back")
            converged = True
            break
        decrease = f - f_new
        U, f = U_new, f_new
        trace.append(f)
        if decrease <= tol * max(f, 1e-300) or f <= 1e-14 * max(np.var(y), 1e-300):
            converged = True
            break
    est = map_back(U, std, method="mave", seed=seed, converged=converged,
                   eigenvalues_or_objective=np.array([f]))
    est.warnings.extend(warnings)
    est.diagnostics.update(objective=f, trace=trace, bandwidth=h, start=start,
                           W_standardized=U)
    return est


def _raw_to_std(U_raw, std):
    # span(U_raw) = whiten span(W)  =>  W = whiten^{-1} U_raw
    return np.linalg.solve(std.whiten, U_raw)


# ---------------------------------------------------------------- CVE


class CveObjective:
    """``L_n(V)`` and its ambient gradient for a fixed bandwidth.

    The distance to the affine subspace ``s0 + Col(V)`` is
    ``|x - s0|^2 - |V^T (x - s0)|^2``, i.e. the squared norm of the component
    orthogonal to ``Col(V)``.
    """

    def __init__(self, X, y, h):
        if not h * h > 0 or not np.isfinite(h):
            raise BandwidthError(f"bandwidth {h!r} is unusable (h^2 must be a positive float)")
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float) - np.mean(y)
        self.h = float(h)
        self.full = _sqdist(self.X)

    def _parts(self, V):
        # no clamping: keeps the cost smooth off the manifold, where the
        # ambient gradient is checked
        D = self.full - _sqdist(V.T @ self.X)
        K = np.exp(-D / (2.0 * self.h * self.h))
        W = K / K.sum(axis=0, keepdims=True)
        ybar = self.y @ W
        m2 = (self.y ** 2) @ W
        Lt = np.maximum(m2 - ybar ** 2, 0.0)
        return K, W, ybar, Lt

    def local(self, V):
        return self._parts(np.asarray(V, dtype=float))[3]

    def __call__(self, V):
        return float(np.mean(self.local(V)))

    def gradient(self, V):
        V = np.asarray(V, dtype=float)
        _, W, ybar, Lt = self._parts(V)
        n = self.y.shape[0]
        G = -(W * ((self.y[:, None] - ybar[None, :]) ** 2 - Lt[None, :])) / (2.0 * self.h ** 2 * n)
        return -2.0 * _laplacian_form(self.X, G) @ V

    def weight_mass(self, V):
        K = self._parts(np.asarray(V, dtype=float))[0]
        return K.sum(axis=0) - 1.0


def cve_fit(data: DataSet, p: int = 1, bandwidth_scale: float = 1.0,
            opt_cfg: OptConfig = OptConfig(max_iter=100, grad_tol=1e-7), seed: int = 0,
            n_random: int = 1, standardize_x: bool = True, V0: Optional[np.ndarray] = None,
            ridge=None) -> SubspaceEstimate:
    """Conditional variance estimation over ``V`` in St(d, d-p).

    The returned basis spans the orthogonal complement of the minimizer.
    Starts: complement of the SIR direction plus ``n_random`` seeded draws.
    """
    _require_numeric(data, "CVE")
    _check_p(p, data.d)
    d, n = data.d, data.n
    if n <= d:
        raise InvalidInputError("CVE needs n > d")
    if p == d:
        raise InvalidInputError("CVE needs p < d")
    q = d - p
    if standardize_x:
        std = standardize(data, ridge)
        Xw = std.Z
    else:
        std = None
        Xw = data.X - data.X.mean(axis=1, keepdims=True)
    rng = np.random.default_rng(seed)
    starts = []
    if V0 is not None:
        starts.append(("given", np.linalg.qr(np.asarray(V0, dtype=float))[0]))
    else:
        try:
            sir = sir_fit(data, p, ridge=ridge)
            Us = orthonormalize(_raw_to_std(sir.U, std)) if std is not None else sir.U
            starts.append(("sir", orthonormal_complement(Us)))
        except (DegenerateCandidateError, InvalidInputError):
            pass
        for k in range(n_random):
            starts.append((f"random{k}", random_orthonormal(d, q, rng)))
        if not starts:
            starts.append(("random", random_orthonormal(d, q, rng)))

    U_init = orthonormal_complement(starts[0][1])
    h = bandwidth(U_init.T @ Xw, bandwidth_scale)
    obj = CveObjective(Xw, data.y, h)
    warnings = []

    def finish(V, f, converged, trace, start):
        U = orthonormal_complement(V)
        if std is not None:
            est = map_back(U, std, method="cve", seed=seed, converged=converged,
                           eigenvalues_or_objective=np.array([f]))
        else:
            est = SubspaceEstimate(U=orthonormalize(U), method="cve", seed=seed,
                                   converged=converged, eigenvalues_or_objective=np.array([f]))
        est.warnings.extend(warnings)
        est.diagnostics.update(objective=f, trace=trace, bandwidth=h, start=start,
                               state=CveState(V=V, objective=f, bandwidth=h))
        return est

    if np.ptp(data.y) == 0:
        warnings.append("zero-variance labels: objective is identically zero")
        V = starts[0][1]
        return finish(V, 0.0, True, [0.0], starts[0][0])
    if np.all(obj.weight_mass(starts[0][1]) < 1e-300):
        raise BandwidthError("kernel weights underflow at every anchor; use a larger bandwidth")

    best = None
    for idx, (name, V0_) in enumerate(starts):
        res = run_with_fallback(obj, obj.gradient, V0_, opt_cfg)
        if best is None or res.trace[-1] < best[1].trace[-1]:
            best = (name, res)
    name, res = best
    if not res.converged:
        warnings.append("CVE optimizer did not converge; returning best iterate")
    return finish(res.U, res.trace[-1], res.converged, res.trace, name)
