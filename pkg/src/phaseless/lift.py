"""Reflectivity amplitudes on a known support from intensity data.

The unknown reflectivities rho on L support pixels are lifted to the L x L
matrix Y = rho rho^*, which enters the intensities linearly:
b_I = diag(A Y A^*). Y is recovered by an accelerated proximal-gradient
iteration with singular-value soft-thresholding, or with a rank-1 projection
in place of the thresholding.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lowrank import DivergenceError, rank_one_project, soft_threshold


class LiftInconsistencyError(ValueError):
    pass


def _blocks(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    return A[None] if A.ndim == 2 else A


def lift_forward(Y: np.ndarray, A: np.ndarray) -> np.ndarray:
    """diag(A Y A^*) for one N x L operator, or stacked for a (nu, N, L) array."""
    blocks = _blocks(A)
    if Y.shape != (blocks.shape[2], blocks.shape[2]):
        raise ValueError(f"Y has shape {Y.shape}, operator expects {blocks.shape[2]} unknowns")
    out = np.einsum("bil,lm,bim->bi", blocks, Y, blocks.conj()).real
    return out[0] if np.ndim(A) == 2 else out


def lift_adjoint(c: np.ndarray, A: np.ndarray) -> np.ndarray:
    """A^* diag(c) A (summed over stacked blocks)."""
    blocks = _blocks(A)
    c = np.asarray(c, float).reshape(blocks.shape[0], blocks.shape[1])
    out = np.einsum("bil,bi,bim->lm", blocks.conj(), c, blocks)
    return 0.5 * (out + out.conj().T)


@dataclass(frozen=True)
class LiftedProblem:
    """Intensity data ``b`` (nu x N) for operators ``A`` (nu x N x L) restricted to ``support``."""

    A: np.ndarray
    b: np.ndarray
    support: tuple[int, ...]
    max_unknowns: int = 64

    def __post_init__(self):
        blocks = _blocks(self.A)
        L = blocks.shape[2]
        if L < 1:
            raise ValueError("support must contain at least one pixel")
        if L > self.max_unknowns:
            raise ValueError(f"lifted problem with {L} unknowns exceeds the limit of {self.max_unknowns}")
        if len(self.support) != L:
            raise ValueError("support size does not match the operator")
        object.__setattr__(self, "A", blocks)
        object.__setattr__(self, "b", np.asarray(self.b, float).reshape(blocks.shape[0], blocks.shape[1]))

    @property
    def size(self) -> int:
        return self.A.shape[2]


@dataclass(frozen=True)
class Fista2Params:
    """``tau`` is ``tau_rel`` times the spectral norm of the first gradient step beta L^*(b)."""

    beta: float | None = None
    tau: float | None = None
    tau_rel: float = 1e-5
    max_iters: int = 5000
    tol: float = 1e-10
    mode: str = "soft-threshold"
    power_iters: int = 20

    def __post_init__(self):
        if self.mode not in ("soft-threshold", "rank-1"):
            raise ValueError(f"unknown mode {self.mode!r}")
        for name in ("beta", "tau"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass
class LiftResult:
    Y: np.ndarray
    iterations: int
    residual: float
    converged: bool
    nuclear_norms: list[float] = field(default_factory=list)


def operator_norm(A: np.ndarray, iters: int = 20) -> float:
    """Largest eigenvalue of L^* L by power iteration from the identity."""
    L = _blocks(A).shape[2]
    Y = np.eye(L, dtype=complex) / np.sqrt(L)
    lam = 0.0
    for _ in range(iters):
        Z = lift_adjoint(lift_forward(Y, A), A)
        lam = np.linalg.norm(Z)
        if lam == 0:
            return 0.0
        Y = Z / lam
    return float(lam)


def nuclear_min_reflectivity(problem: LiftedProblem, params: Fista2Params | None = None) -> LiftResult:
    """min |Y|_* subject to L(Y) = b_I, via Algorithm-2 style accelerated thresholding."""
    params = params or Fista2Params()
    A, b = problem.A, problem.b
    L = problem.size
    norm_b = np.linalg.norm(b)
    if norm_b == 0:
        return LiftResult(np.zeros((L, L), dtype=complex), 0, 0.0, True, [0.0])
    lip = operator_norm(A, params.power_iters)
    beta = params.beta if params.beta is not None else 0.9 / lip
    tau = params.tau
    if tau is None:
        tau = params.tau_rel * beta * np.linalg.norm(lift_adjoint(b, A), 2)
    project = rank_one_project if params.mode == "rank-1" else (lambda G: soft_threshold(G, tau))

    Y_prev = Y = np.zeros((L, L), dtype=complex)
    t_prev = t = 1.0
    nuc = []
    converged = False
    for k in range(1, params.max_iters + 1):
        w = (t_prev - 1.0) / t
        W = (1 + w) * Y - w * Y_prev
        G = W - beta * lift_adjoint(lift_forward(W, A) - b, A)
        Y_new = project(G)
        Y_new = 0.5 * (Y_new + Y_new.conj().T)
        if not np.all(np.isfinite(Y_new)):
            raise DivergenceError(f"lifted solver produced non-finite iterate at step {k}")
        nuc.append(float(np.linalg.svd(Y_new, compute_uv=False).sum()))
        change = np.linalg.norm(Y_new - Y) / max(np.linalg.norm(Y_new), np.finfo(float).tiny)
        Y_prev, Y = Y, Y_new
        t_prev, t = t, (1 + np.sqrt(1 + 4 * t * t)) / 2
        if change <= params.tol:
            converged = True
            break
    residual = float(np.linalg.norm(lift_forward(Y, A) - b) / norm_b)
    return LiftResult(Y, k, residual, converged, nuc)


def amplitudes_from_lift(Y: np.ndarray, rtol: float = 1e-6) -> np.ndarray:
    """sqrt(max(Re Y_ii, 0)); strongly negative diagonal entries raise."""
    d = np.real(np.diag(Y))
    scale = np.abs(d).max(initial=0.0)
    if scale > 0 and d.min() < -rtol * scale:
        raise LiftInconsistencyError(f"diagonal entry {d.min():.3g} is strongly negative")
    return np.sqrt(np.clip(d, 0.0, None))
