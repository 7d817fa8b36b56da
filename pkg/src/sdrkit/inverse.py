"""Inverse-regression estimators: SIR, SAVE, PIR, simple CR, DR, PFC and LAD."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats as sps

from .errors import DegenerateCandidateError, InvalidInputError, NumericalError
from .linalg import (
    DataSet,
    StandardizedData,
    SubspaceEstimate,
    fix_signs,
    map_back,
    orthonormalize,
    random_orthonormal,
    standardize,
    sym_eig,
)
from .manifold import OptConfig, run_with_fallback
from .slicing import SliceStats, make_slices, slice_stats

log = logging.getLogger(__name__)

DEGENERATE_TOL = 1e-10


@dataclass
class CandidateMatrix:
    M: np.ndarray
    method: str


@dataclass
class PfcModel:
    mu: np.ndarray
    U: np.ndarray
    beta: np.ndarray
    basis_kind: "LabelBasis"
    sigma2: float
    Sigma_eps: Optional[np.ndarray] = None


@dataclass(frozen=True)
class LabelBasis:
    """Label feature map ``f(y)``: ``polynomial`` of degree ``size`` or
    ``slice_indicator`` over ``size`` slices (one indicator dropped)."""

    kind: str = "polynomial"
    size: int = 3

    def design(self, y, categorical: bool = False) -> np.ndarray:
        y = np.asarray(y)
        if self.kind == "polynomial":
            if categorical:
                raise InvalidInputError("polynomial label basis needs numeric labels")
            y = y.astype(float)
            sd = y.std()
            t = (y - y.mean()) / (sd if sd > 0 else 1.0)
            F = np.column_stack([t ** k for k in range(1, self.size + 1)])
        elif self.kind == "slice_indicator":
            strategy = "categorical" if categorical else "equal_frequency"
            sl = make_slices(y, 0 if categorical else self.size, strategy)
            F = np.zeros((y.shape[0], sl.h - 1))
            for s in range(sl.h - 1):
                F[sl.assignments == s, s] = 1.0
        else:
            raise InvalidInputError(f"unknown label basis {self.kind!r}")
        return F - F.mean(axis=0)


def _check_p(p: int, d: int):
    if not isinstance(p, (int, np.integer)) or p < 1:
        raise InvalidInputError("p must be a positive integer")
    if p > d:
        raise InvalidInputError(f"p={p} exceeds d={d}")


def _prepare(data: DataSet, h: int, strategy: str, ridge=None):
    std = standardize(data, ridge)
    if data.categorical:
        strategy = "categorical"
        h = 0
    sl = make_slices(data.y, h, strategy)
    return std, sl, slice_stats(std.Z, sl)


def _leading(M: np.ndarray, p: int, method: str):
    lam, V = sym_eig(M)
    if np.abs(lam).max() < DEGENERATE_TOL:
        raise DegenerateCandidateError(
            f"{method}: degenerate candidate matrix (all eigenvalues below {DEGENERATE_TOL})")
    return lam, V[:, :p]


def sir_matrix(st: SliceStats) -> CandidateMatrix:
    M = np.einsum("s,si,sj->ij", st.proportions, st.means, st.means)
    return CandidateMatrix(0.5 * (M + M.T), "sir")


def save_matrix(st: SliceStats) -> CandidateMatrix:
    d = st.means.shape[1]
    M = np.zeros((d, d))
    for rho, V in zip(st.proportions, st.covariances):
        D = np.eye(d) - V
        M += rho * D @ D
    return CandidateMatrix(0.5 * (M + M.T), "save")


def dr_matrix(st: SliceStats) -> CandidateMatrix:
    d = st.means.shape[1]
    I = np.eye(d)
    first = np.zeros((d, d))
    for rho, S in zip(st.proportions, st.second_moments):
        D = S - I
        first += rho * D @ D
    mean_outer = np.einsum("s,si,sj->ij", st.proportions, st.means, st.means)
    mean_sq = float(np.einsum("s,si,si->", st.proportions, st.means, st.means))
    F = 2 * first + 2 * mean_outer @ mean_outer + 2 * mean_sq * mean_outer
    return CandidateMatrix(0.5 * (F + F.T), "dr")


def _eigen_fit(data, p, h, strategy, builder, name, ridge=None):
    _check_p(p, data.d)
    std, sl, st = _prepare(data, h, strategy, ridge)
    cand = builder(st)
    lam, W = _leading(cand.M, p, name)
    est = map_back(W, std, method=name, eigenvalues_or_objective=lam[:p])
    est.warnings.extend(st.warnings)
    est.diagnostics.update(eigenvalues=lam, h=sl.h)
    return est


def sir_fit(data: DataSet, p: int = 1, h: int = 10, strategy: str = "equal_frequency",
            ridge=None) -> SubspaceEstimate:
    est = _eigen_fit(data, p, h, strategy, sir_matrix, "sir", ridge)
    h_eff = est.diagnostics["h"]
    if p > h_eff - 1:
        est.warnings.append(f"p={p} exceeds the SIR rank bound h-1={h_eff - 1}")
    return est


def save_fit(data: DataSet, p: int = 1, h: int = 10, strategy: str = "equal_frequency",
             ridge=None) -> SubspaceEstimate:
    return _eigen_fit(data, p, h, strategy, save_matrix, "save", ridge)


def dr_fit(data: DataSet, p: int = 1, h: int = 10, strategy: str = "equal_frequency",
           ridge=None) -> SubspaceEstimate:
    if h < 2 and not data.categorical:
        raise InvalidInputError("directional regression needs h >= 2")
    return _eigen_fit(data, p, h, strategy, dr_matrix, "dr", ridge)


def _design_rank_check(F: np.ndarray):
    if F.shape[1] == 0:
        raise InvalidInputError("label design has no columns")
    s = np.linalg.svd(F, compute_uv=False)
    if s[0] <= 1e-12 * np.sqrt(F.shape[0]):
        raise InvalidInputError("centered label design has rank 0 (constant labels?)")
    rank = int(np.sum(s > 1e-10 * s[0]))
    if rank < F.shape[1]:
        bad = []
        for j in range(F.shape[1]):
            if np.linalg.matrix_rank(F[:, : j + 1], tol=1e-10 * s[0]) <= j:
                bad.append(j)
        raise InvalidInputError(
            f"label design is rank deficient; collinear basis column(s) {bad}")


def pir_fit(data: DataSet, p: int = 1, basis_kind: LabelBasis = LabelBasis(),
            ridge=None) -> SubspaceEstimate:
    _check_p(p, data.d)
    F = basis_kind.design(data.y, data.categorical)
    _design_rank_check(F)
    if p > F.shape[1]:
        raise InvalidInputError(f"p={p} exceeds the label basis size r={F.shape[1]}")
    std = standardize(data, ridge)
    B, *_ = np.linalg.lstsq(F, std.Z.T, rcond=None)  # r x d
    _, s, Vt = np.linalg.svd(B, full_matrices=False)
    W = fix_signs(Vt[:p].T)
    est = map_back(W, std, method="pir", eigenvalues_or_objective=s[:p])
    est.diagnostics.update(coefficients=B, singular_values=s)
    return est


def cr_matrix(X, y, c: float, chunk: int = 512):
    """Pairwise contour matrix over pairs ``i<j`` with ``|y_i - y_j| <= c``.

    Returns ``(M_hat, N_c)``; ``M_hat`` is normalized by the number of
    qualifying pairs. Uses ``sum_{i<j} A_ij (x_i-x_j)(x_i-x_j)^T = X (D - A) X^T``
    with ``A`` built in row blocks.
    """
    X = np.asarray(X, dtype=float)
    X = X - X.mean(axis=1, keepdims=True)  # differences are shift-free; centering limits cancellation
    y = np.asarray(y, dtype=float)
    d, n = X.shape
    acc = np.zeros((d, d))
    degree = np.zeros(n)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        A = (np.abs(y[start:stop, None] - y[None, :]) <= c).astype(float)
        A[np.arange(stop - start), np.arange(start, stop)] = 0.0
        degree[start:stop] = A.sum(axis=1)
        acc -= X[:, start:stop] @ (A @ X.T)
    acc += (X * degree) @ X.T
    n_pairs = int(round(degree.sum() / 2))
    if n_pairs == 0:
        return np.zeros((d, d)), 0
    M = acc / n_pairs
    return 0.5 * (M + M.T), n_pairs


def default_cr_threshold(y, quantile: float = 0.05, n_pairs: int = 10_000, seed: int = 0) -> float:
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(seed)
    n = y.shape[0]
    i = rng.integers(0, n, n_pairs)
    j = rng.integers(0, n, n_pairs)
    keep = i != j
    return float(np.quantile(np.abs(y[i[keep]] - y[j[keep]]), quantile))


def cr_fit(data: DataSet, p: int = 1, c: Optional[float] = None, seed: int = 0,
           ridge=None) -> SubspaceEstimate:
    _check_p(p, data.d)
    if data.categorical:
        raise InvalidInputError("contour regression needs numeric labels")
    if c is None:
        c = default_cr_threshold(data.y, seed=seed)
    if not c > 0:
        raise InvalidInputError("threshold c must be positive")
    M, n_pairs = cr_matrix(data.X, data.y, c)
    if n_pairs == 0:
        raise InvalidInputError(f"threshold c={c:g} is too small: no qualifying pairs")
    std = standardize(data, ridge)
    Mw = std.whiten @ M @ std.whiten
    lam, V = sym_eig(Mw)
    tail = V[:, ::-1][:, :p]
    tail_lam = lam[::-1][:p]
    est = map_back(tail, std, method="cr", eigenvalues_or_objective=tail_lam)
    d = data.d
    if n_pairs < 10 * d * d:
        est.warnings.append(f"only {n_pairs} qualifying pairs (< 10 d^2); estimate is unstable")
    if p < d:
        asc = lam[::-1]
        gap = asc[p] - asc[p - 1]
        if gap <= 1e-8 * max(np.abs(lam).max(), 1e-300):
            est.warnings.append("degenerate candidate matrix: tailing eigenvalues are not separated")
    est.diagnostics.update(eigenvalues=lam, threshold=c, n_pairs=n_pairs)
    return est


def pfc_fit(data: DataSet, p: int = 1, basis_kind: Optional[LabelBasis] = None,
            noise: str = "isotropic", max_iter: int = 100, tol: float = 1e-9,
            level: float = 0.99):
    """Principal fitted components by maximum likelihood.

    ``noise="isotropic"`` has a closed form. ``noise="general"`` alternates
    between a reduced-rank fit in the noise metric and the residual covariance.
    The default basis is a cubic polynomial, or class indicators for
    categorical labels. Returns ``(SubspaceEstimate, PfcModel)``.
    """
    _check_p(p, data.d)
    if basis_kind is None:
        basis_kind = LabelBasis("slice_indicator") if data.categorical else LabelBasis()
    F = basis_kind.design(data.y, data.categorical)
    _design_rank_check(F)
    r = F.shape[1]
    if p > r:
        raise InvalidInputError(f"p={p} exceeds the label basis size r={r}")
    X = data.X
    d, n = X.shape
    mu = X.mean(axis=1)
    Xc = X - mu[:, None]
    B = np.linalg.lstsq(F, Xc.T, rcond=None)[0].T  # d x r
    fitted = B @ F.T
    warnings = []

    if noise == "isotropic":
        Uf, _, _ = np.linalg.svd(fitted, full_matrices=False)
        U = fix_signs(Uf[:, :p])
        beta = U.T @ B
        resid = Xc - U @ beta @ F.T
        sigma2 = float(np.sum(resid ** 2) / (n * d))
        sigma2_null = float(np.sum(Xc ** 2) / (n * d))
        if sigma2 <= 0:
            sigma2 = np.finfo(float).tiny
        loglik = -0.5 * n * d * (np.log(2 * np.pi * sigma2) + 1)
        loglik_null = -0.5 * n * d * (np.log(2 * np.pi * sigma2_null) + 1)
        Sigma_eps = None
        basis = U
    elif noise == "general":
        Sigma = np.cov(Xc, bias=True)
        prev = -np.inf
        for it in range(max_iter):
            lam, V = np.linalg.eigh(Sigma)
            if lam[0] <= 1e-12 * lam[-1]:
                raise NumericalError("noise covariance became singular", iterations=it)
            Sm = (V / np.sqrt(lam)) @ V.T
            Sp = (V * np.sqrt(lam)) @ V.T
            Vw, _, _ = np.linalg.svd(Sm @ fitted, full_matrices=False)
            Vw = Vw[:, :p]
            Gamma = Sp @ Vw @ Vw.T @ Sm @ B
            resid = Xc - Gamma @ F.T
            Sigma = resid @ resid.T / n
            sign, logdet = np.linalg.slogdet(Sigma)
            loglik = -0.5 * n * (d * np.log(2 * np.pi) + logdet + d)
            if abs(loglik - prev) <= tol * max(1.0, abs(loglik)):
                break
            prev = loglik
        else:
            raise NumericalError(
                f"general-noise PFC did not converge; last log-likelihood {loglik:.6g}",
                iterations=max_iter)
        lam, V = np.linalg.eigh(Sigma)
        Sm = (V / np.sqrt(lam)) @ V.T
        Sp = (V * np.sqrt(lam)) @ V.T
        U = fix_signs(np.linalg.qr(Sp @ Vw)[0])
        beta = U.T @ Gamma
        basis = np.linalg.qr(Sm @ Vw)[0]
        sigma2 = float(np.trace(Sigma) / d)
        Sigma_eps = Sigma
        S0 = Xc @ Xc.T / n
        loglik_null = -0.5 * n * (d * np.log(2 * np.pi) + np.linalg.slogdet(S0)[1] + d)
    else:
        raise InvalidInputError(f"unknown noise structure {noise!r}")

    lr = 2.0 * (loglik - loglik_null)
    df = p * (d + r - p)
    threshold = float(sps.chi2.ppf(level, df))
    if lr < threshold:
        warnings.append("no fitted component: likelihood gain over the null model is not significant")
    est = SubspaceEstimate(U=orthonormalize(basis), method="pfc",
                           eigenvalues_or_objective=np.array([loglik]))
    est.warnings.extend(warnings)
    est.diagnostics.update(loglik=loglik, loglik_null=loglik_null, lr_stat=lr,
                           lr_threshold=threshold, noise=noise)
    model = PfcModel(mu=mu, U=U, beta=beta, basis_kind=basis_kind, sigma2=sigma2,
                     Sigma_eps=Sigma_eps)
    return est, model


# ---------------------------------------------------------------- LAD


def _logdet_spd(A):
    sign, val = np.linalg.slogdet(A)
    if sign <= 0:
        return np.inf
    return val


def lad_objective(U, Sigma, Deltas, rho) -> float:
    """Negative LAD log-likelihood per sample, up to constants (to minimize).

    ``-0.5 log|U'Sigma U| + 0.5 sum_s rho_s log|U'Delta_s U|``; depends on
    ``span(U)`` only.
    """
    U = np.asarray(U, dtype=float)
    val = -0.5 * _logdet_spd(U.T @ Sigma @ U)
    for r, D in zip(rho, Deltas):
        val += 0.5 * r * _logdet_spd(U.T @ D @ U)
    return float(val)


def lad_gradient(U, Sigma, Deltas, rho) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    SU = Sigma @ U
    G = -SU @ np.linalg.inv(U.T @ SU)
    for r, D in zip(rho, Deltas):
        DU = D @ U
        G += r * DU @ np.linalg.inv(U.T @ DU)
    return G


def lad_fit(data: DataSet, p: int = 1, h: int = 10, strategy: str = "equal_frequency",
            opt_cfg: OptConfig = OptConfig(), n_random: int = 2, slice_ridge: float = 1e-6,
            ridge=None) -> SubspaceEstimate:
    """Likelihood acquired directions with multi-start Stiefel descent.

    Optimization runs in standardized coordinates, where the marginal term is
    constant; the reported objective is the same quantity in raw coordinates.
    """
    _check_p(p, data.d)
    d, n = data.d, data.n
    std, sl, st = _prepare(data, h, strategy, ridge)
    warnings = list(st.warnings)
    counts = sl.counts
    Vs = []
    for s, V in enumerate(st.covariances):
        if counts[s] <= d or np.linalg.eigvalsh(V)[0] < 1e-10:
            V = V + slice_ridge * np.eye(d)
            warnings.append(f"per-slice ridge engaged for slice {s}")
        Vs.append(V)
    rho = st.proportions
    I = np.eye(d)

    # raw-coordinate quantities for reporting: Delta_s = Sigma^{1/2} V_s Sigma^{1/2}
    Sinv_half_inv = np.linalg.inv(std.whiten)
    Deltas_raw = [Sinv_half_inv @ V @ Sinv_half_inv for V in Vs]
    Sigma_raw = Sinv_half_inv @ Sinv_half_inv

    def cost(W):
        return lad_objective(W, I, Vs, rho)

    def grad(W):
        return lad_gradient(W, I, Vs, rho)

    if p == d:
        est = map_back(I, std, method="lad")
        obj = lad_objective(est.U, Sigma_raw, Deltas_raw, rho)
        est.eigenvalues_or_objective = np.array([obj])
        est.warnings.extend(warnings + ["trivial dimension: p = d, objective is constant"])
        est.diagnostics.update(objective=obj, trace=[obj])
        return est

    starts = []
    for name, builder in (("sir", sir_matrix), ("save", save_matrix), ("dr", dr_matrix)):
        try:
            starts.append((name, _leading(builder(st).M, p, name)[1]))
        except DegenerateCandidateError:
            warnings.append(f"{name} warm start skipped (degenerate)")
    rng = np.random.default_rng(opt_cfg.seed)
    for k in range(n_random):
        starts.append((f"random{k}", random_orthonormal(d, p, rng)))

    best = None
    runs = []
    for idx, (name, W0) in enumerate(starts):
        W0 = np.linalg.qr(W0)[0]
        res = run_with_fallback(cost, grad, W0, opt_cfg)
        runs.append((name, res.trace[-1], res.converged))
        if best is None or res.trace[-1] < best[1].trace[-1]:
            best = (idx, res)
    idx, res = best
    est = map_back(res.U, std, method="lad", seed=opt_cfg.seed, converged=res.converged)
    obj = lad_objective(est.U, Sigma_raw, Deltas_raw, rho)
    loglik = -0.5 * n * d * (1 + np.log(2 * np.pi)) - 0.5 * n * _logdet_spd(Sigma_raw) - n * obj
    est.eigenvalues_or_objective = np.array([obj])
    if not res.converged:
        warnings.append("LAD optimizer did not converge; returning best iterate")
    est.warnings.extend(warnings)
    est.diagnostics.update(objective=obj, loglik=loglik, trace=res.trace,
                           start=starts[idx][0], starts=runs)
    return est
