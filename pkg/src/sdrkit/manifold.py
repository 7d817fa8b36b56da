"""First-order Riemannian descent on the Stiefel manifold.

Rotation-invariant (Grassmann) costs are optimized directly on a Stiefel
representative; nothing here knows about quotient geometry.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidInputError, NumericalError, StallError

log = logging.getLogger(__name__)

MAX_HALVINGS = 50


@dataclass(frozen=True)
class OptConfig:
    max_iter: int = 200
    grad_tol: float = 1e-7
    step_init: float = 1.0
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4
    seed: int = 0
    check_armijo: bool = False
    f_tol: float = 0.0  # relative decrease stop; 0 disables it
    bb_step: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be >= 1")
        if self.grad_tol <= 0 or self.step_init <= 0 or self.f_tol < 0:
            raise InvalidInputError("tolerances and step sizes must be positive")
        if not 0 < self.backtrack_factor < 1 or not 0 < self.armijo_c < 1:
            raise InvalidInputError("backtrack_factor and armijo_c must lie in (0, 1)")


@dataclass
class OptResult:
    U: np.ndarray
    trace: list
    iterations: int
    converged: bool
    grad_norm: float
    message: str = ""
    steps: list = field(default_factory=list)


def _sym(A):
    return 0.5 * (A + A.T)


def tangent_project(U, G):
    U = np.asarray(U, dtype=float)
    G = np.asarray(G, dtype=float)
    if U.shape != G.shape:
        raise InvalidInputError(f"shape mismatch {U.shape} vs {G.shape}")
    return G - U @ _sym(U.T @ G)


def qr_retract(U, T, step: float):
    Y = np.asarray(U, dtype=float) + step * np.asarray(T, dtype=float)
    Q, R = np.linalg.qr(Y)
    diag = np.diag(R)
    if np.min(np.abs(diag)) < 1e-12:
        raise NumericalError("step too large: retraction collapsed rank")
    return Q * np.sign(diag)


def minimize_stiefel(cost: Callable, grad: Callable, U0, cfg: OptConfig = OptConfig()) -> OptResult:
    """Projected-gradient descent with Armijo backtracking and QR retraction.

    Trial steps are Barzilai-Borwein estimates from the last two iterates when
    ``cfg.bb_step`` is set (otherwise the previous step doubled), so the
    objective trace is monotone either way. Raises :class:`StallError` after
    ``MAX_HALVINGS`` consecutive rejected trials; the best iterate rides on
    the exception.
    """
    U = np.asarray(U0, dtype=float)
    f = float(cost(U))
    if not np.isfinite(f):
        raise InvalidInputError("cost is not finite at the starting point")
    trace = [f]
    steps = []
    step = cfg.step_init
    gnorm = np.inf
    prev = None
    for it in range(1, cfg.max_iter + 1):
        T = tangent_project(U, grad(U))
        gnorm = float(np.linalg.norm(T))
        if gnorm < cfg.grad_tol:
            return OptResult(U, trace, it, True, gnorm, "gradient tolerance reached", steps)
        if cfg.bb_step and prev is not None:
            S, Yd = U - prev[0], T - prev[1]
            sy = abs(float(np.sum(S * Yd)))
            if sy > 0:
                step = float(np.clip(np.sum(S * S) / sy, 1e-12, 1e6))
        prev = (U, T)
        g2 = gnorm * gnorm
        accepted = False
        for _ in range(MAX_HALVINGS):
            try:
                U_new = qr_retract(U, -T, step)
                f_new = float(cost(U_new))
            except NumericalError:
                f_new = np.inf
            if np.isfinite(f_new) and f_new <= f - cfg.armijo_c * step * g2:
                accepted = True
                break
            step *= cfg.backtrack_factor
        if not accepted:
            raise StallError(
                f"line search failed after {MAX_HALVINGS} halvings at iteration {it}",
                best=U, trace=trace, iterations=it)
        if cfg.check_armijo:
            assert f_new <= f - cfg.armijo_c * step * g2
        if not f_new < f:
            # sufficient-decrease margin is below float resolution
            return OptResult(U, trace, it, True, gnorm, "no representable decrease", steps)
        decrease = f - f_new
        U, f = U_new, f_new
        trace.append(f)
        steps.append(step)
        step = min(step / cfg.backtrack_factor, 1e6)
        if decrease <= cfg.f_tol * max(1.0, abs(f)):
            return OptResult(U, trace, it, True, gnorm, "relative decrease below f_tol", steps)
    return OptResult(U, trace, cfg.max_iter, False, gnorm, "max_iter reached", steps)


def run_with_fallback(cost, grad, U0, cfg: OptConfig):
    """Run :func:`minimize_stiefel`, turning a stall into a non-converged result."""
    try:
        return minimize_stiefel(cost, grad, U0, cfg)
    except StallError as exc:
        tr = exc.trace
        # no representable decrease left: round-off, not a failure
        flat = len(tr) > 1 and abs(tr[-2] - tr[-1]) <= 1e-10 * max(1.0, abs(tr[-1]))
        if not flat:
            log.warning("%s; keeping best iterate", exc)
        return OptResult(exc.best, tr, exc.iterations or 0, flat, np.nan, str(exc))


def numerical_gradient(cost, U, eps: float = 1e-6):
    """Central finite differences of ``cost`` in every ambient coordinate."""
    U = np.asarray(U, dtype=float)
    G = np.zeros_like(U)
    for idx in np.ndindex(*U.shape):
        E = np.zeros_like(U)
        E[idx] = eps
        G[idx] = (cost(U + E) - cost(U - E)) / (2 * eps)
    return G
