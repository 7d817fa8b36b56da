"""Kernel dimension reduction: supervised (trace and log-det forms), the
HSIC / supervised-PCA closed form, manifold KDR and unsupervised KDR."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import linalg as sla
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import BandwidthError, DegenerateCandidateError, InvalidInputError, NumericalError
from .inverse import _check_p, sir_fit
from .linalg import (
    DataSet,
    SubspaceEstimate,
    map_back,
    orthonormalize,
    random_orthonormal,
    standardize,
    sym_eig,
)
from .manifold import OptConfig, run_with_fallback

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "gaussian"
    bandwidth: Union[float, str] = "median-heuristic"
    ridge_eps: float = 1e-4

    def __post_init__(self):
        if self.kind not in ("linear", "gaussian"):
            raise InvalidInputError(f"unknown kernel kind {self.kind!r}")
        if self.bandwidth != "median-heuristic" and not float(self.bandwidth) > 0:
            raise InvalidInputError("explicit bandwidth must be positive")
        if not self.ridge_eps > 0:
            raise InvalidInputError("ridge_eps must be positive")

    def with_bandwidth(self, sigma: float) -> "KernelSpec":
        return KernelSpec(self.kind, float(sigma), self.ridge_eps)


@dataclass
class KernelMatrix:
    K: np.ndarray
    centered: bool = False
    bandwidth: Optional[float] = None


@dataclass
class MkdrState:
    T: np.ndarray
    K_x: np.ndarray
    graph_k: int
    heat_sigma: float
    K_m: Optional[np.ndarray] = None  # m x m coefficient matrix, K_x = T^T K_m T
    trace: list = field(default_factory=list)
    converged: bool = True
    warnings: list = field(default_factory=list)


def _sqdist(M):
    sq = np.sum(M * M, axis=0)
    D = sq[:, None] + sq[None, :] - 2.0 * (M.T @ M)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def median_distance(M) -> float:
    D = _sqdist(np.atleast_2d(M))
    iu = np.triu_indices(D.shape[0], 1)
    return float(np.median(np.sqrt(D[iu]))) if iu[0].size else 0.0


def gram(M, spec: KernelSpec = KernelSpec()) -> KernelMatrix:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("kernel input contains NaN or Inf")
    if spec.kind == "linear":
        K = M.T @ M
        return KernelMatrix(0.5 * (K + K.T))
    if spec.bandwidth == "median-heuristic":
        sigma = median_distance(M)
        if sigma <= 0:
            raise BandwidthError("median pairwise distance is zero; bandwidth undefined")
    else:
        sigma = float(spec.bandwidth)
    K = np.exp(-_sqdist(M) / (2.0 * sigma * sigma))
    return KernelMatrix(K, bandwidth=sigma)


def double_center(K: KernelMatrix) -> KernelMatrix:
    A = np.asarray(K.K if isinstance(K, KernelMatrix) else K, dtype=float)
    A = A - A.mean(axis=0, keepdims=True)
    A = A - A.mean(axis=1, keepdims=True)
    return KernelMatrix(0.5 * (A + A.T), centered=True,
                        bandwidth=getattr(K, "bandwidth", None))


def hsic(K1: KernelMatrix, K2: KernelMatrix) -> float:
    """Unnormalized empirical HSIC ``tr(H K1 H K2)``."""
    A = K1 if isinstance(K1, KernelMatrix) else KernelMatrix(np.asarray(K1))
    B = K2 if isinstance(K2, KernelMatrix) else KernelMatrix(np.asarray(K2))
    if A.K.shape != B.K.shape:
        raise InvalidInputError(f"kernel size mismatch {A.K.shape} vs {B.K.shape}")
    if not A.centered:
        if B.centered:
            A, B = B, A
        else:
            A = double_center(A)
    return float(np.sum(A.K * B.K))


def label_kernel(data: DataSet, spec: KernelSpec = KernelSpec()) -> KernelMatrix:
    """Centered label kernel: delta for categorical labels, ``spec`` otherwise."""
    y = data.y
    if data.categorical:
        K = (y[:, None] == y[None, :]).astype(float)
    elif np.ptp(y) == 0:
        K = np.ones((y.shape[0], y.shape[0]))
    else:
        K = gram(y[None, :].astype(float), spec).K
    return double_center(KernelMatrix(K))


class KdrProblem:
    """``tr(K_Y (K_Xt + n eps I)^{-1})`` (or its log-det sibling) as a
    function of the projection ``U``.

    ``sigma=None`` with a gaussian kernel recomputes the median-heuristic
    bandwidth from ``U^T X`` at every call; the analytic gradient then treats
    the bandwidth as a constant.
    """

    def __init__(self, X, Ky: np.ndarray, kind: str = "gaussian", sigma: Optional[float] = None,
                 eps: float = 1e-4, objective: str = "trace"):
        self.X = np.asarray(X, dtype=float)
        self.Ky = np.asarray(Ky, dtype=float)
        self.kind = kind
        self.sigma = sigma
        self.n = self.X.shape[1]
        self.c = self.n * eps
        if objective not in ("trace", "logdet"):
            raise InvalidInputError(f"unknown KDR objective {objective!r}")
        self.objective = objective

    def _kernel(self, U):
        P = U.T @ self.X
        if self.kind == "linear":
            return P.T @ P, None
        sigma = self.sigma if self.sigma is not None else median_distance(P)
        if sigma <= 0:
            raise BandwidthError("projected points coincide; bandwidth undefined")
        return np.exp(-_sqdist(P) / (2.0 * sigma * sigma)), sigma

    def _centered(self, K):
        return double_center(KernelMatrix(K)).K

    def _trace_parts(self, Kc):
        try:
            cf = sla.cho_factor(Kc + self.c * np.eye(self.n))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"kernel system is not positive definite: {exc}") from exc
        A = sla.cho_solve(cf, np.eye(self.n))
        return 0.5 * (A + A.T)

    def _logdet_parts(self, Kc):
        lam, Q = np.linalg.eigh(Kc)
        lam = np.clip(lam, 0.0, None)
        c = self.c
        g = lam ** 2 / (lam + c) ** 2
        # (K_Y + cI)^2 - K_Y C K_Y without the cancellation: 1 - g = c(2 lam + c)/(lam + c)^2
        KQ = self.Ky @ Q
        S = (KQ * (c * (2 * lam + c) / (lam + c) ** 2)) @ KQ.T + 2 * c * self.Ky + c * c * np.eye(self.n)
        S = 0.5 * (S + S.T)
        return lam, Q, g, S

    def value(self, U) -> float:
        K, _ = self._kernel(np.asarray(U, dtype=float))
        Kc = self._centered(K)
        if self.objective == "trace":
            return float(np.sum(self.Ky * self._trace_parts(Kc)))
        *_, S = self._logdet_parts(Kc)
        sign, val = np.linalg.slogdet(S)
        if sign <= 0:
            raise NumericalError("conditional covariance estimate is not positive definite")
        return float(val)

    __call__ = value

    def _dK(self, U):
        """Sensitivity ``E = d objective / d K`` (uncentered kernel) and the kernel."""
        K, sigma = self._kernel(U)
        Kc = self._centered(K)
        if self.objective == "trace":
            A = self._trace_parts(Kc)
            E = -(A @ self.Ky @ A)
        else:
            lam, Q, g, S = self._logdet_parts(Kc)
            P = self.Ky @ np.linalg.solve(S, self.Ky)
            P = 0.5 * (P + P.T)
            gp = 2.0 * lam * self.c / (lam + self.c) ** 3
            dl = lam[:, None] - lam[None, :]
            close = np.abs(dl) <= 1e-10 * max(1.0, lam.max())
            with np.errstate(divide="ignore", invalid="ignore"):
                Gam = np.where(close, 0.5 * (gp[:, None] + gp[None, :]),
                               (g[:, None] - g[None, :]) / np.where(close, 1.0, dl))
            E = -(Q @ ((Q.T @ P @ Q) * Gam) @ Q.T)
        return double_center(KernelMatrix(0.5 * (E + E.T))).K, K, sigma

    def gradient(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        E, K, sigma = self._dK(U)
        X = self.X
        if self.kind == "linear":
            return 2.0 * X @ E @ X.T @ U
        G = E * K
        r = 2.0 * G.sum(axis=1)
        XG = X @ G @ X.T
        lap = (X * r) @ X.T - 2.0 * XG
        return -(lap @ U) / (sigma * sigma)


def _problem(U, data, spec, objective="trace", label_spec=None):
    Ky = label_kernel(data, label_spec or spec).K
    sigma = None if spec.bandwidth == "median-heuristic" else float(spec.bandwidth)
    return KdrProblem(data.X, Ky, spec.kind, sigma, spec.ridge_eps, objective)


def kdr_objective(U, data: DataSet, spec: KernelSpec = KernelSpec(), objective: str = "trace") -> float:
    return _problem(U, data, spec, objective).value(U)


def kdr_grad(U, data: DataSet, spec: KernelSpec = KernelSpec(), objective: str = "trace") -> np.ndarray:
    return _problem(U, data, spec, objective).gradient(U)


def _subsample(data: DataSet, max_samples: Optional[int], seed: int) -> DataSet:
    if max_samples is None or data.n <= max_samples:
        return data
    idx = np.sort(np.random.default_rng(seed).choice(data.n, max_samples, replace=False))
    return DataSet(data.X[:, idx], data.y[idx], data.categorical, data.feature_names)


def _multistart(problem_for, starts, opt_cfg):
    """Optimize from each start; lowest final objective wins, ties by index."""
    best = None
    runs = []
    for idx, (name, U0) in enumerate(starts):
        prob = problem_for(U0)
        res = run_with_fallback(prob, prob.gradient, U0, opt_cfg)
        runs.append((name, res.trace[0], res.trace[-1], res.converged))
        if best is None or res.trace[-1] < best[2].trace[-1]:
            best = (idx, prob, res)
    return best, runs


def kdr_fit(data: DataSet, p: int = 1, spec: KernelSpec = KernelSpec(),
            opt_cfg: OptConfig = OptConfig(max_iter=100, grad_tol=1e-6),
            objective: str = "trace", standardize_x: bool = True, max_samples: Optional[int] = 400,
            n_random: int = 2, seed: int = 0, label_spec: Optional[KernelSpec] = None,
            ridge=None) -> SubspaceEstimate:
    """Supervised KDR over the Stiefel manifold with multi-start descent.

    Large inputs are fit on a seeded subsample of ``max_samples`` points.
    With a median-heuristic kernel, each start freezes the bandwidth computed
    from its own initial projection.
    """
    _check_p(p, data.d)
    d = data.d
    if p >= d:
        raise InvalidInputError("supervised KDR needs p < d")
    sub = _subsample(data, max_samples, seed)
    if standardize_x:
        std = standardize(sub, ridge)
        Xw = std.Z
    else:
        std = None
        Xw = sub.X
    Ky = label_kernel(sub, label_spec or spec).K
    rng = np.random.default_rng(seed)
    starts = []
    try:
        sir = sir_fit(sub, p, ridge=ridge)
        W0 = np.linalg.solve(std.whiten, sir.U) if std is not None else sir.U
        starts.append(("sir", np.linalg.qr(W0)[0]))
    except (DegenerateCandidateError, InvalidInputError):
        pass
    for k in range(n_random):
        starts.append((f"random{k}", random_orthonormal(d, p, rng)))
    warnings = []

    def problem_for(U0):
        sigma = None
        if spec.kind == "gaussian":
            sigma = (median_distance(U0.T @ Xw) if spec.bandwidth == "median-heuristic"
                     else float(spec.bandwidth))
        return KdrProblem(Xw, Ky, spec.kind, sigma, spec.ridge_eps, objective)

    def wrap(U, converged, trace, extra):
        if std is not None:
            est = map_back(U, std, method="kdr", seed=seed, converged=converged,
                           eigenvalues_or_objective=np.array([trace[-1]]))
        else:
            est = SubspaceEstimate(U=orthonormalize(U), method="kdr", seed=seed,
                                   converged=converged,
                                   eigenvalues_or_objective=np.array([trace[-1]]))
        est.warnings.extend(warnings)
        est.diagnostics.update(objective=trace[-1], trace=trace, n_used=sub.n, **extra)
        return est

    if np.abs(Ky).max() < 1e-12:
        warnings.append("uninformative labels: centered label kernel is zero")
        U0 = starts[0][1]
        return wrap(U0, True, [0.0], {"start": starts[0][0]})

    (idx, prob, res), runs = _multistart(problem_for, starts, opt_cfg)
    if not res.converged:
        warnings.append("KDR optimizer did not converge; returning best iterate")
    return wrap(res.U, res.converged, res.trace,
                {"start": starts[idx][0], "starts": runs, "bandwidth": prob.sigma,
                 "W": res.U})


def hsic_matrix(X, Ky) -> np.ndarray:
    """``X H K_Y H X^T`` for a d x n covariate matrix."""
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=1, keepdims=True)  # X H
    Kc = double_center(KernelMatrix(np.asarray(Ky, dtype=float))).K
    M = Xc @ Kc @ Xc.T
    return 0.5 * (M + M.T)


def kdr_hsic_fit(data: DataSet, p: int = 1, label_kernel_matrix: Optional[np.ndarray] = None) -> SubspaceEstimate:
    """Closed-form HSIC maximizer with a linear kernel on ``U^T X``
    (the supervised-PCA solution)."""
    _check_p(p, data.d)
    if label_kernel_matrix is None:
        if data.categorical:
            y = data.y
            Ky = (y[:, None] == y[None, :]).astype(float)
        else:
            Ky = np.outer(data.y, data.y)
    else:
        Ky = np.asarray(label_kernel_matrix, dtype=float)
        if Ky.shape != (data.n, data.n):
            raise InvalidInputError("label kernel must be n x n")
    M = hsic_matrix(data.X, Ky)
    lam, V = sym_eig(M)
    est = SubspaceEstimate(U=V[:, :p], method="kdr_hsic", eigenvalues_or_objective=lam[:p])
    est.diagnostics.update(eigenvalues=lam, hsic=float(np.sum(lam[:p])), matrix=M)
    return est


# ---------------------------------------------------------------- manifold KDR


def project_psd_trace(K) -> np.ndarray:
    """Euclidean projection onto ``{K PSD, tr K = 1}``: project the spectrum
    onto the probability simplex."""
    K = np.asarray(K, dtype=float)
    lam, Q = np.linalg.eigh(0.5 * (K + K.T))
    u = np.sort(lam)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u - (css - 1.0) / k > 0)[0][-1]
    tau = (css[rho] - 1.0) / (rho + 1)
    mu = np.maximum(lam - tau, 0.0)
    P = (Q * mu) @ Q.T
    return 0.5 * (P + P.T)


def knn_graph(X, k: int):
    """Symmetric k-NN graph with heat-kernel weights; returns ``(W, sigma)``."""
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    if not 1 <= k < n:
        raise InvalidInputError("graph_k must lie in [1, n-1]")
    dist, idx = cKDTree(X.T).query(X.T, k=k + 1)
    dist, idx = dist[:, 1:], idx[:, 1:]
    sigma = float(np.median(dist))
    if sigma <= 0:
        raise BandwidthError("median neighbor distance is zero")
    W = np.zeros((n, n))
    rows = np.repeat(np.arange(n), k)
    W[rows, idx.ravel()] = np.exp(-dist.ravel() ** 2 / (2.0 * sigma * sigma))
    return np.maximum(W, W.T), sigma


def laplacian_tail(W, m: int) -> np.ndarray:
    """``m`` Laplacian eigenvectors after the constant one, as rows (m x n)."""
    n_comp, _ = connected_components(csr_matrix(W), directed=False)
    if n_comp > 1:
        raise InvalidInputError(
            f"neighbor graph has {n_comp} components; increase graph_k or fit each component")
    L = np.diag(W.sum(axis=1)) - W
    lam, V = np.linalg.eigh(L)
    return V[:, 1:m + 1].T


class _MkdrObjective:
    def __init__(self, T, Ky, c):
        self.c = c
        self.Yt = T @ Ky @ T.T
        self.const = float(np.trace(Ky) - np.sum((T @ Ky) * T)) / c

    def value(self, K):
        A = np.linalg.inv(K + self.c * np.eye(K.shape[0]))
        return float(np.sum(self.Yt * A)) + self.const

    def gradient(self, K):
        A = np.linalg.inv(K + self.c * np.eye(K.shape[0]))
        G = -A @ self.Yt @ A
        return 0.5 * (G + G.T)


def mkdr_fit(data: DataSet, p: int = 1, m: Optional[int] = None, graph_k: int = 10,
             spec: KernelSpec = KernelSpec(), opt_cfg: OptConfig = OptConfig(max_iter=500),
             tol: float = 1e-10):
    """Manifold KDR by projected gradient over ``{K_x PSD, tr K_x = 1}``.

    Returns ``(embedding, MkdrState)`` with a p x n embedding.
    """
    n = data.n
    if m is None:
        m = min(2 * p + 5, n - 1)
    if not 1 <= p <= m <= n - 1:
        raise InvalidInputError("need 1 <= p <= m <= n-1")
    W, sigma = knn_graph(data.X, min(graph_k, n - 1))
    T = laplacian_tail(W, m)
    Ky = label_kernel(data, spec).K
    obj = _MkdrObjective(T, Ky, n * spec.ridge_eps)
    K = np.eye(m) / m
    f = obj.value(K)
    trace = [f]
    step = 1.0
    converged = False
    for _ in range(opt_cfg.max_iter):
        G = obj.gradient(K)
        gn = np.linalg.norm(G)
        if gn == 0:
            converged = True
            break
        alpha = step / gn
        moved = False
        for _ in range(50):
            K_new = project_psd_trace(K - alpha * G)
            f_new = obj.value(K_new)
            if f_new <= f - 1e-4 * np.sum((K_new - K) ** 2) / alpha:
                moved = True
                break
            alpha *= 0.5
        if not moved:
            converged = True  # no representable decrease left
            break
        change = np.linalg.norm(K_new - K)
        K, f = K_new, f_new
        trace.append(f)
        step = min(alpha * gn * 2.0, 1e6)
        if change < tol:
            converged = True
            break
    lam, A = np.linalg.eigh(K)
    order = np.argsort(-lam)
    lam, A = np.clip(lam[order], 0, None), A[:, order]
    Phi = (np.sqrt(lam)[:, None] * A.T)[:p]
    embedding = Phi @ T
    state = MkdrState(T=T, K_x=T.T @ K @ T, graph_k=graph_k, heat_sigma=sigma, K_m=K,
                      trace=trace, converged=converged)
    if not converged:
        state.warnings.append("mKDR did not converge; returning best iterate")
        log.warning(state.warnings[-1])
    return embedding, state


# ---------------------------------------------------------------- unsupervised KDR


GRID_STEP = 0.005


def ukdr_fit(data, p: int = 1, spec: KernelSpec = KernelSpec(),
             opt_cfg: OptConfig = OptConfig(max_iter=200, grad_tol=1e-8),
             n_random: int = 2, seed: int = 0, max_samples: Optional[int] = 400,
             flat_tol: float = 0.1) -> SubspaceEstimate:
    """Unsupervised KDR: the full-data kernel plays the role of the labels.

    ``data`` may be a :class:`DataSet` or a bare d x n matrix (n >= 2).
    The fit is flagged "weakly identified" when the relative spread of the
    objective is below ``flat_tol``: over a 0.005 rad angle grid when d=2,
    p=1, otherwise over the start and end values of all starts.
    """
    if not isinstance(data, DataSet):
        X = np.atleast_2d(np.asarray(data, dtype=float))
        data = DataSet(X, np.zeros(X.shape[1]))
    _check_p(p, data.d)
    d = data.d
    if p >= d:
        raise InvalidInputError("unsupervised KDR needs p < d")
    sub = _subsample(data, max_samples, seed)
    X = sub.X - sub.X.mean(axis=1, keepdims=True)
    Kx = double_center(gram(X, spec)).K
    rng = np.random.default_rng(seed)
    lam, V = sym_eig(X @ X.T)
    starts = [("pca", V[:, :p])]
    for k in range(n_random):
        starts.append((f"random{k}", random_orthonormal(d, p, rng)))

    def problem_for(U0):
        sigma = None
        if spec.kind == "gaussian":
            sigma = (median_distance(U0.T @ X) if spec.bandwidth == "median-heuristic"
                     else float(spec.bandwidth))
            if sigma <= 0:
                sigma = median_distance(X)
        return KdrProblem(X, Kx, spec.kind, sigma, spec.ridge_eps)

    (idx, prob, res), runs = _multistart(problem_for, starts, opt_cfg)
    est = SubspaceEstimate(U=orthonormalize(res.U), method="ukdr", seed=seed,
                           converged=res.converged,
                           eigenvalues_or_objective=np.array([res.trace[-1]]))
    if d == 2 and p == 1:
        # every line through the origin is reachable: scan the half circle
        th = np.arange(0.0, np.pi, GRID_STEP)
        values = [problem_for(U).value(U) for U in
                  (np.array([[np.cos(t)], [np.sin(t)]]) for t in th)]
    else:
        values = [v for _, a, b, _ in runs for v in (a, b)]
    best = min(values)
    spread = (max(values) - best) / max(abs(best), 1e-300)
    if spread < flat_tol:
        est.warnings.append("weakly identified: objective is nearly flat across starts")
    if not res.converged:
        est.warnings.append("unsupervised KDR optimizer did not converge; returning best iterate")
    est.diagnostics.update(objective=res.trace[-1], trace=res.trace, starts=runs,
                           start=starts[idx][0], spread=spread)
    return est
