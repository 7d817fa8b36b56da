"""Synthetic models with known central subspaces, subspace metrics and a
seeded benchmark runner."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInputError, SDRError
from .forward import cve_fit, mave_fit, phd_fit
from .inverse import cr_fit, dr_fit, lad_fit, pfc_fit, pir_fit, save_fit, sir_fit
from .kdr import kdr_fit, kdr_hsic_fit, ukdr_fit
from .linalg import DataSet, SubspaceEstimate, _check_orthonormal, principal_angles

log = logging.getLogger(__name__)

MODELS = {
    # name -> required p_true
    "single_index_linear": 1,
    "single_index_sine": 1,
    "quadratic": 1,
    "mean_plus_variance": 2,
    "classification_two_gaussians": 1,
}
SEED_STRIDE = 1_000_003


@dataclass
class GeneratorModel:
    name: str = "single_index_linear"
    d: int = 10
    n: int = 2000
    noise_sigma: float = 0.1
    seed: int = 0
    p_true: Optional[int] = None
    U_true: Optional[np.ndarray] = None
    covariance: str = "identity"  # or "correlated": AR(1) with rho = 0.5

    def __post_init__(self):
        if self.name not in MODELS:
            raise InvalidInputError(f"unknown model {self.name!r}; choose from {sorted(MODELS)}")
        need = MODELS[self.name]
        if self.p_true is None:
            self.p_true = need
        if self.p_true != need:
            raise InvalidInputError(f"model {self.name} has p_true={need}, got {self.p_true}")
        if self.d < need or self.n < 2:
            raise InvalidInputError("need d >= p_true and n >= 2")
        if not self.noise_sigma >= 0:
            raise InvalidInputError("noise_sigma must be non-negative")
        if self.covariance not in ("identity", "correlated"):
            raise InvalidInputError(f"unknown covariance option {self.covariance!r}")
        if self.U_true is None:
            self.U_true = np.eye(self.d)[:, :need]
        else:
            self.U_true = _check_orthonormal(np.asarray(self.U_true, dtype=float), "U_true")
            if self.U_true.shape != (self.d, need):
                raise InvalidInputError(f"U_true must be {self.d} x {need}")

    def with_seed(self, seed: int) -> "GeneratorModel":
        return GeneratorModel(self.name, self.d, self.n, self.noise_sigma, seed,
                              self.p_true, self.U_true, self.covariance)


def generate(model: GeneratorModel):
    """Draw ``(DataSet, U_true)``; bit-identical for a fixed model and seed."""
    rng = np.random.default_rng(model.seed)
    d, n = model.d, model.n
    X = rng.standard_normal((d, n))
    if model.covariance == "correlated":
        idx = np.arange(d)
        X = np.linalg.cholesky(0.5 ** np.abs(idx[:, None] - idx[None, :])) @ X
    eps = rng.standard_normal(n)
    P = model.U_true.T @ X
    s = model.noise_sigma
    categorical = False
    if model.name == "single_index_linear":
        y = P[0] + s * eps
    elif model.name == "single_index_sine":
        y = np.sin(2.0 * P[0]) + s * eps
    elif model.name == "quadratic":
        y = P[0] ** 2 + s * eps
    elif model.name == "mean_plus_variance":
        y = P[0] + P[1] ** 2 + s * eps
    else:
        y = (P[0] + s * rng.logistic(size=n) > 0).astype(float)
        categorical = True
    return DataSet(X, y, categorical=categorical), model.U_true.copy()


def subspace_error(est, U_true):
    """``(max principal angle, ||P1 - P2||_F / sqrt 2)``; symmetric in its arguments.

    Spans of different dimension get a max angle of pi/2.
    """
    U1 = est.U if isinstance(est, SubspaceEstimate) else np.asarray(est, dtype=float)
    U2 = _check_orthonormal(np.asarray(U_true, dtype=float), "U_true")
    U1 = _check_orthonormal(U1, "estimate")
    if U1.shape[0] != U2.shape[0]:
        raise InvalidInputError(f"dimension mismatch: d={U1.shape[0]} vs d={U2.shape[0]}")
    proj = float(np.linalg.norm(U1 @ U1.T - U2 @ U2.T) / np.sqrt(2.0))
    if U1.shape[1] != U2.shape[1]:
        return float(np.pi / 2), proj
    return float(principal_angles(U1, U2)[-1]), proj


# ---------------------------------------------------------------- registry


def _pfc(data, p, **kw):
    return pfc_fit(data, p, **kw)[0]


METHODS: dict[str, Callable] = {
    "sir": sir_fit,
    "save": save_fit,
    "dr": dr_fit,
    "pir": pir_fit,
    "cr": cr_fit,
    "pfc": _pfc,
    "lad": lad_fit,
    "phd": phd_fit,
    "mave": mave_fit,
    "cve": cve_fit,
    "kdr": kdr_fit,
    "kdr_hsic": kdr_hsic_fit,
    "ukdr": ukdr_fit,
}
SEEDED = {"cr", "mave", "cve", "kdr", "ukdr"}


def fit_method(name: str, data: DataSet, p: int, seed: int = 0, **params) -> SubspaceEstimate:
    if name not in METHODS:
        raise InvalidInputError(f"unknown method {name!r}; choose from {sorted(METHODS)}")
    if name in SEEDED:
        params.setdefault("seed", seed)
    return METHODS[name](data, p, **params)


@dataclass
class BenchRow:
    method: str
    model: str
    replicate: int
    seed: int
    max_angle: float
    proj_f: float
    seconds: float
    converged: bool


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    HEADER = "method,model,replicate,seed,max_angle,proj_f,seconds,converged"

    def medians(self) -> dict:
        out = {}
        for m in dict.fromkeys(r.method for r in self.rows):
            out[m] = float(np.median([r.max_angle for r in self.rows if r.method == m]))
        return out

    def to_csv(self) -> str:
        lines = [self.HEADER]
        for r in self.rows:
            lines.append(f"{r.method},{r.model},{r.replicate},{r.seed},{r.max_angle:.17g},"
                         f"{r.proj_f:.17g},{r.seconds:.6f},{str(r.converged).lower()}")
        return "\n".join(lines) + "\n"


def replicate_seed(base_seed: int, i: int) -> int:
    return base_seed * SEED_STRIDE + i


def _run_one(methods, model, p, i, base_seed, params):
    seed = replicate_seed(base_seed, i)
    data, U = generate(model.with_seed(seed))
    rows = []
    for m in methods:
        t0 = time.perf_counter()
        try:
            est = fit_method(m, data, p, seed=seed, **params.get(m, {}))
            ang, pf = subspace_error(est, U)
            ok = bool(est.converged)
        except (SDRError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            log.warning("%s failed on replicate %d: %s", m, i, exc)
            ang, pf, ok = float(np.pi / 2), 1.0, False
        rows.append(BenchRow(m, model.name, i, seed, ang, pf, time.perf_counter() - t0, ok))
    return rows


def run_benchmark(methods, model: GeneratorModel, replicates: int, base_seed: int = 0,
                  p: Optional[int] = None, jobs: int = 1, params: Optional[dict] = None) -> BenchReport:
    """Fit each method on ``replicates`` seeded draws of ``model``.

    Failures become ``converged=False`` rows with angle pi/2. Rows are ordered
    by (method order, replicate) whatever the completion order.
    """
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise InvalidInputError(f"unknown method {m!r}")
    if replicates < 0:
        raise InvalidInputError("replicates must be >= 0")
    p = p or model.p_true
    params = params or {}
    jobs = max(1, jobs or os.cpu_count() or 1)
    args = [(methods, model, p, i, base_seed, params) for i in range(replicates)]
    if jobs == 1:
        chunks = [_run_one(*a) for a in args]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(lambda a: _run_one(*a), args))
    rows = [r for chunk in chunks for r in chunk]
    order = {m: k for k, m in enumerate(methods)}
    rows.sort(key=lambda r: (order[r.method], r.replicate))
    return BenchReport(rows)
