"""Dense SVD helpers, singular-value shrinkage and SVT matrix completion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SvdResult:
    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.s) @ self.V.conj().T


def svd(A: np.ndarray) -> SvdResult:
    """Thin SVD with descending singular values and ``A = U diag(s) V^*``."""
    A = np.asarray(A)
    if not np.all(np.isfinite(A)):
        raise ValueError("svd input has non-finite entries")
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    return SvdResult(U, s, Vh.conj().T)


def soft_threshold(A: np.ndarray, tau: float) -> np.ndarray:
    """U diag(max(s - tau, 0)) V^*."""
    if tau < 0:
        raise ValueError(f"threshold must be non-negative, got {tau}")
    r = svd(A)
    s = np.maximum(r.s - tau, 0.0)
    keep = s > 0
    return (r.U[:, keep] * s[keep]) @ r.V[:, keep].conj().T


def rank_one_project(A: np.ndarray) -> np.ndarray:
    """Best rank-1 approximation s_1 U_1 V_1^*."""
    r = svd(A)
    if r.s.size == 0:
        return np.zeros_like(A)
    return r.s[0] * np.outer(r.U[:, 0], r.V[:, 0].conj())


def _hermitian_shrink(Y: np.ndarray, tau: float) -> tuple[np.ndarray, int]:
    # singular values of a Hermitian matrix are |eigenvalues|
    lam, Q = np.linalg.eigh(Y)
    mag = np.maximum(np.abs(lam) - tau, 0.0)
    keep = mag > 0
    X = (Q[:, keep] * (np.sign(lam[keep]) * mag[keep])) @ Q[:, keep].conj().T
    return 0.5 * (X + X.conj().T), int(keep.sum())


@dataclass(frozen=True)
class CompletionParams:
    """SVT settings. ``None`` picks the data-scaled defaults.

    tau defaults to ``tau_scale * N * mean|M_ij|`` over known entries and the
    step to ``step_scale * N^2 / |known|``.
    """

    tau: float | None = None
    step: float | None = None
    tau_scale: float = 5.0
    step_scale: float = 1.2
    max_iters: int = 500
    tol: float = 1e-6
    patience: int = 20

    def __post_init__(self):
        for name in ("tau", "step"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1 or self.tol <= 0:
            raise ValueError("max_iters and tol must be positive")


@dataclass(frozen=True)
class CompletionResult:
    matrix: np.ndarray
    iterations: int
    residual: float
    converged: bool
    rank: int


def complete_matrix(M: np.ndarray, known: np.ndarray, params: CompletionParams | None = None) -> CompletionResult:
    """Fill the unknown entries of a Hermitian matrix by nuclear-norm minimisation (SVT).

    Returns the iterate with the smallest relative residual on the known
    entries; stops early once that residual drops below ``params.tol``.
    """
    params = params or CompletionParams()
    known = np.asarray(known, bool)
    if not known.any():
        raise ValueError("no known entries to complete from")
    if known.all():
        return CompletionResult(np.array(M, dtype=complex), 0, 0.0, True, int(np.linalg.matrix_rank(M)))

    n = M.shape[0]
    PM = np.where(known, M, 0.0)
    norm_known = np.linalg.norm(PM)
    if norm_known == 0:
        return CompletionResult(np.zeros_like(PM), 0, 0.0, True, 0)
    tau = params.tau if params.tau is not None else params.tau_scale * n * np.abs(PM[known]).mean()
    step = params.step if params.step is not None else params.step_scale * n * n / known.sum()

    # kick-start so the first shrinkage is already non-zero
    k0 = np.ceil(tau / (step * np.linalg.norm(PM, 2)))
    Y = k0 * step * PM
    best = (np.inf, PM, 0, 0)
    prev, rising = np.inf, 0
    for it in range(1, params.max_iters + 1):
        X, rank = _hermitian_shrink(Y, tau)
        R = np.where(known, M - X, 0.0)
        res = np.linalg.norm(R) / norm_known
        if not np.isfinite(res):
            raise DivergenceError(f"SVT produced non-finite iterate at step {it}")
        if res < best[0]:
            best = (res, X, it, rank)
        if res <= params.tol:
            break
        rising = rising + 1 if res > prev else 0
        if rising >= params.patience and res > 1.0:
            raise DivergenceError(f"SVT residual grew for {rising} iterations (now {res:.3g})")
        prev = res
        Y = Y + step * R
        Y = 0.5 * (Y + Y.conj().T)
    res, X, it_best, rank = best
    return CompletionResult(X, it_best, float(res), bool(res <= params.tol), rank)
