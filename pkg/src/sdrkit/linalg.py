"""Dense linear algebra shared by every estimator.

Data matrices follow the column-per-sample convention: ``X`` is ``d x n``.
Covariances are normalized by ``1/n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError, NumericalError, SingularityError

ORTHO_TOL = 1e-10


@dataclass
class DataSet:
    """Covariates ``X`` (d x n) and labels ``y`` (length n)."""

    X: np.ndarray
    y: np.ndarray
    categorical: bool = False
    feature_names: Optional[Sequence[str]] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.size == 0:
            raise InvalidInputError("X must be a non-empty d x n matrix")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("X contains NaN or Inf")
        y = np.asarray(self.y)
        if y.ndim != 1 or y.shape[0] != X.shape[1]:
            raise InvalidInputError(
                f"y has length {y.shape[0] if y.ndim else 0}, expected n={X.shape[1]}")
        if X.shape[1] < 2:
            raise InvalidInputError("need at least n=2 samples")
        if not self.categorical:
            y = y.astype(float)
            if not np.all(np.isfinite(y)):
                raise InvalidInputError("y contains NaN or Inf")
        if self.feature_names is not None and len(self.feature_names) != X.shape[0]:
            raise InvalidInputError("feature_names length must equal d")
        self.X = X
        self.y = y

    @property
    def d(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]


@dataclass
class StandardizedData:
    Z: np.ndarray
    mu_x: np.ndarray
    whiten: np.ndarray
    ridge: float
    cov: np.ndarray


@dataclass
class SubspaceEstimate:
    """Orthonormal basis ``U`` (d x p) of an estimated central subspace."""

    U: np.ndarray
    method: str
    eigenvalues_or_objective: Optional[np.ndarray] = None
    seed: Optional[int] = None
    converged: bool = True
    warnings: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        if U.ndim != 2 or not 1 <= U.shape[1] <= U.shape[0]:
            raise InvalidInputError(f"basis must be d x p with 1 <= p <= d, got {U.shape}")
        err = np.abs(U.T @ U - np.eye(U.shape[1])).max()
        if err > ORTHO_TOL:
            raise NumericalError(f"basis is not orthonormal (max deviation {err:.2e})")
        self.U = U

    @property
    def d(self) -> int:
        return self.U.shape[0]

    @property
    def p(self) -> int:
        return self.U.shape[1]


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.size == 0:
        raise InvalidInputError("expected a non-empty 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("matrix contains NaN or Inf")
    return X


def sample_mean(X) -> np.ndarray:
    X = _as_matrix(X)
    return X.mean(axis=1)


def sample_covariance(X) -> np.ndarray:
    X = _as_matrix(X)
    Xc = X - X.mean(axis=1, keepdims=True)
    S = Xc @ Xc.T / X.shape[1]
    return 0.5 * (S + S.T)


def fix_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive.

    ``argmax`` returns the first maximal index, which breaks ties by lowest index.
    """
    V = np.array(V, dtype=float, copy=True)
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _symmetric(S, name="matrix") -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise InvalidInputError(f"{name} contains NaN or Inf")
    scale = max(1.0, np.abs(S).max())
    if np.abs(S - S.T).max() > 1e-8 * scale:
        raise InvalidInputError(f"{name} is not symmetric")
    return 0.5 * (S + S.T)


def sym_eig(S):
    """Eigenvalues in descending order with sign-normalized eigenvectors."""
    S = _symmetric(S)
    try:
        lam, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver did not converge: {exc}") from exc
    order = np.argsort(-lam, kind="stable")
    return lam[order], fix_signs(V[:, order])


def default_ridge(S: np.ndarray) -> float:
    d = S.shape[0]
    return 1e-8 * float(np.trace(S)) / d


def sym_inv_sqrt(S, ridge: float = 0.0) -> np.ndarray:
    """``(S + ridge*I)^{-1/2}`` through an eigendecomposition."""
    if ridge < 0:
        raise InvalidInputError("ridge must be nonnegative")
    S = _symmetric(S)
    lam, V = np.linalg.eigh(S + ridge * np.eye(S.shape[0]))
    if lam[0] <= 1e-12 * max(1.0, abs(lam[-1])):
        raise SingularityError(
            f"matrix is singular (min eigenvalue {lam[0]:.3e}); use a larger ridge")
    R = (V / np.sqrt(lam)) @ V.T
    return 0.5 * (R + R.T)


def sym_sqrt(S) -> np.ndarray:
    S = _symmetric(S)
    lam, V = np.linalg.eigh(S)
    R = (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T
    return 0.5 * (R + R.T)


def standardize(data: DataSet, ridge: Optional[float] = None) -> StandardizedData:
    """Whiten covariates: ``Z = cov^{-1/2} (X - mean)``.

    ``ridge=None`` uses the scale-aware default ``1e-8 * trace(cov) / d``.
    """
    X = data.X if isinstance(data, DataSet) else _as_matrix(data)
    mu = X.mean(axis=1)
    S = sample_covariance(X)
    r = default_ridge(S) if ridge is None else float(ridge)
    W = sym_inv_sqrt(S, r)
    Z = W @ (X - mu[:, None])
    return StandardizedData(Z=Z, mu_x=mu, whiten=W, ridge=r, cov=S)


def generalized_eig(A, B):
    """Solve ``A u = lam B u`` for symmetric A and SPD B.

    Eigenpairs are ordered by decreasing ``|lam|``; eigenvectors are
    B-orthonormal with the sign convention of :func:`sym_eig`.
    """
    A = _symmetric(A, "A")
    B = _symmetric(B, "B")
    if A.shape != B.shape:
        raise InvalidInputError("A and B must have the same shape")
    Bm = sym_inv_sqrt(B, 0.0)
    lam, V = sym_eig(Bm @ A @ Bm)
    order = np.argsort(-np.abs(lam), kind="stable")
    return lam[order], fix_signs(Bm @ V[:, order])


def orthonormalize(U: np.ndarray) -> np.ndarray:
    """Thin QR with a rank check; columns get the :func:`fix_signs` convention."""
    U = np.asarray(U, dtype=float)
    Q, R = np.linalg.qr(U)
    diag = np.abs(np.diag(R))
    scale = max(np.linalg.norm(U, axis=0).max(), 1e-300)
    if diag.size == 0 or diag.min() <= 1e-10 * scale:
        raise InvalidInputError("columns are linearly dependent (rank-deficient basis)")
    return fix_signs(Q)


def map_back(W, std: StandardizedData, method: str = "", **kwargs) -> SubspaceEstimate:
    """Map standardized directions to the original covariate scale."""
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    U = orthonormalize(std.whiten @ W)
    return SubspaceEstimate(U=U, method=method, **kwargs)


def _check_orthonormal(U, name="basis", tol=1e-8):
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    if np.abs(U.T @ U - np.eye(U.shape[1])).max() > tol:
        raise InvalidInputError(f"{name} is not orthonormal")
    return U


def principal_angles(U1, U2) -> np.ndarray:
    """Principal angles between two subspaces, ascending, in ``[0, pi/2]``.

    Cosines come from the singular values of ``U1^T U2``; small angles are
    recomputed from sines, where ``arccos`` loses precision near 1.
    """
    U1 = _check_orthonormal(U1, "U1")
    U2 = _check_orthonormal(U2, "U2")
    if U1.shape != U2.shape:
        raise InvalidInputError(f"dimension mismatch: {U1.shape} vs {U2.shape}")
    C = U1.T @ U2
    cos = np.clip(np.linalg.svd(C, compute_uv=False), 0.0, 1.0)
    angles = np.arccos(cos)  # ascending
    resid = U2 - U1 @ C
    sin = np.sort(np.clip(np.linalg.svd(resid, compute_uv=False), 0.0, 1.0))
    small = angles < np.pi / 4
    angles[small] = np.arcsin(sin)[small]
    return np.sort(angles)


def orthonormal_complement(V) -> np.ndarray:
    V = _check_orthonormal(V, "V")
    d, q = V.shape
    if q >= d:
        raise InvalidInputError("complement requires q < d")
    Q, _ = np.linalg.qr(np.hstack([V, np.eye(d)]), mode="reduced")
    U = Q[:, q:d]
    # project out residual V components left by rounding, then re-orthonormalize
    U = U - V @ (V.T @ U)
    U, _ = np.linalg.qr(U)
    return fix_signs(U)


def random_orthonormal(d: int, p: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((d, p)))
    return Q * np.sign(np.diag(R))
