"""Joint-sparse (MMV) imaging with singular-vector illuminations.

Illuminating with a right singular vector V_j of M gives array data
sigma_j conj(V_j) up to an unknown phase, so the phases discarded by the
intensity measurements are not needed. Effective sources X solve G X = B with
few non-zero rows; the solver is the GeLMA shrinkage iteration.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .acquisition import IlluminationVector
from .lowrank import DivergenceError
from .music import ImageMap, SubspaceModel, subspace_model


def build_forward_operator(f, G: np.ndarray) -> np.ndarray:
    """N x K operator whose column k is (g_k^T f) g_k, so that P f = A rho."""
    f = f.f if isinstance(f, IlluminationVector) else np.asarray(f)
    return G * (G.T @ f)[None, :]


def singular_vector_data(M, dim: int, eta: float = 1e-6) -> tuple[list[IlluminationVector], np.ndarray]:
    """Illuminations V_1..V_dim and data columns sqrt(s_j(M)) conj(V_j)."""
    model = M if isinstance(M, SubspaceModel) else subspace_model(M, eta, dim)
    if dim < 1:
        raise ValueError("need at least one singular vector")
    rank = int(np.count_nonzero(model.spectrum > 1e-12 * model.spectrum[0]))
    if dim > rank or dim > model.dim:
        raise ValueError(f"requested {dim} singular vectors but the numerical rank is {rank}")
    V = model.V[:, :dim]
    sigma = np.sqrt(model.spectrum[:dim])
    illum = [IlluminationVector(V[:, j].copy(), "singular-vector", -1, j) for j in range(dim)]
    return illum, sigma * V.conj()


@dataclass(frozen=True)
class GelmaParams:
    """GeLMA settings for the system rescaled to unit spectral norm.

    ``tau`` defaults to ``tau_scale`` times the largest row norm of G^* B
    (both rescaled). The step must satisfy 0 < beta < 1, which on the
    rescaled system is the same as beta * |G|_2^2 < 1.
    """

    beta: float = 0.9
    tau: float | None = None
    tau_scale: float = 1.0
    max_iters: int = 20000
    tol: float = 1e-8
    patience: int = 200
    trace_every: int = 10
    # stop when the best residual improves by less than stall_tol over stall_window steps
    stall_window: int = 0
    stall_tol: float = 1e-2

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError("beta * |G|^2 must lie in (0, 1) on the normalised system")
        if (self.tau is not None and self.tau <= 0) or self.tau_scale <= 0:
            raise ValueError("regularisation must be positive")
        if self.max_iters < 1 or self.tol < 0:
            raise ValueError("bad iteration limits")


@dataclass
class GelmaResult:
    X: np.ndarray
    iterations: int
    residual: float
    converged: bool
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    stalled: bool = False


def mixed_norm(X: np.ndarray, p: float = 2, q: float = 1) -> float:
    """l_q norm of the vector of row l_p norms."""
    if p < 1 or q < 1:
        raise ValueError("p and q must be at least 1")
    rows = np.linalg.norm(np.atleast_2d(X), ord=p, axis=1)
    return float(np.linalg.norm(rows, ord=q))


def gelma_mmv(G: np.ndarray, B: np.ndarray, params: GelmaParams | None = None) -> GelmaResult:
    """min J_{2,1}(X) subject to G X = B."""
    params = params or GelmaParams()
    B = np.asarray(B).reshape(G.shape[0], -1)
    X = np.zeros((G.shape[1], B.shape[1]), dtype=complex)
    norm_b = np.linalg.norm(B)
    if norm_b == 0:
        return GelmaResult(X, 1, 0.0, True, [(1, 0.0, 0.0)])

    c = 1.0 / np.linalg.norm(G, 2)
    Gn, Bn = c * G, c * B
    Gh = Gn.conj().T
    beta = params.beta
    tau = params.tau if params.tau is not None else params.tau_scale * np.linalg.norm(Gh @ Bn, axis=1).max()
    thresh = beta * tau
    Z = np.zeros_like(Bn)
    trace = []
    res = 1.0
    best = np.inf
    stalled = 0
    history = []
    plateau = False
    for it in range(1, params.max_iters + 1):
        R = Bn - Gn @ X
        res = np.linalg.norm(R) / (c * norm_b)
        if not np.isfinite(res):
            raise DivergenceError(f"GeLMA produced non-finite residual at iteration {it}")
        if res <= params.tol:
            break
        # noisy data: the residual settles at the noise level and stops improving
        history.append(min(res, history[-1]) if history else res)
        w = params.stall_window
        if w and len(history) > w and res > (1 - params.stall_tol) * history[-1 - w]:
            plateau = True
            break
        if res < best:
            best, stalled = res, 0
        else:
            stalled += 1
            if stalled >= params.patience and res > max(10 * best, 1.0):
                raise DivergenceError(f"GeLMA residual grew from {best:.3g} to {res:.3g}")
        X += beta * (Gh @ (Z + R))
        rows = np.linalg.norm(X, axis=1)
        shrink = np.maximum(rows - thresh, 0.0) / np.where(rows > 0, rows, 1.0)
        X *= shrink[:, None]
        Z += beta * R
        if it % params.trace_every == 0:
            trace.append((it, float(res), float(shrink @ rows)))
    else:
        it = params.max_iters
    if not np.all(np.isfinite(X)):
        raise DivergenceError("GeLMA produced non-finite iterates")
    return GelmaResult(X, it, float(res), res <= params.tol, trace, plateau)


def row_support(X: np.ndarray, tol: float = 1e-3) -> list[int]:
    """Rows whose l2 norm exceeds ``tol`` times the largest row norm."""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    rows = np.linalg.norm(X, axis=1)
    if rows.max(initial=0.0) == 0:
        return []
    return [int(k) for k in np.flatnonzero(rows > tol * rows.max())]


def top_rows(X: np.ndarray, m: int) -> list[int]:
    """The ``m`` rows of largest l2 norm, sorted; ties go to the lowest index."""
    if not 1 <= m <= X.shape[0]:
        raise ValueError(f"cannot pick {m} rows from {X.shape[0]}")
    order = np.argsort(-np.linalg.norm(X, axis=1), kind="stable")
    return sorted(int(k) for k in order[:m])


def mmv_support(G: np.ndarray, B: np.ndarray, result: GelmaResult, m: int, pool: int = 3) -> list[int]:
    """Support of size ``m`` from a GeLMA result.

    A converged or noise-limited (stalled) iterate gives its ``m`` largest
    rows directly; an iterate stopped by the iteration cap is refined by
    pruning its ``pool * m`` largest rows.
    """
    if result.converged or result.stalled:
        return top_rows(result.X, m)
    order = np.argsort(-np.linalg.norm(result.X, axis=1), kind="stable")
    return prune_support(G, B, order[: min(pool * m, len(order))], m)


def prune_support(G: np.ndarray, B: np.ndarray, candidates, m: int) -> list[int]:
    """Backward elimination: drop candidate rows one at a time until ``m`` remain.

    Each step removes the row whose removal raises the least-squares residual
    of G[:, S] X_S = B the least. Used on the largest rows of an unconverged
    GeLMA iterate, where the energy of one scatterer can still be spread over
    neighbouring pixels.
    """
    S = sorted(int(k) for k in candidates)
    if m < 1 or m > len(S):
        raise ValueError(f"cannot keep {m} of {len(S)} candidates")
    B = np.asarray(B).reshape(G.shape[0], -1)

    def resid(cols):
        A = G[:, cols]
        return np.linalg.norm(B - A @ np.linalg.lstsq(A, B, rcond=None)[0])

    while len(S) > m:
        costs = [resid(S[:i] + S[i + 1:]) for i in range(len(S))]
        S.pop(int(np.argmin(costs)))
    return S


def refit_on_support(G: np.ndarray, B: np.ndarray, support) -> np.ndarray:
    """Least-squares sources restricted to ``support`` (zero elsewhere).

    Removes the shrinkage bias of the l_{2,1} solution once the rows are known.
    """
    support = [int(k) for k in support]
    B = np.asarray(B).reshape(G.shape[0], -1)
    X = np.zeros((G.shape[1], B.shape[1]), dtype=complex)
    if support:
        X[support] = np.linalg.lstsq(G[:, support], B, rcond=None)[0]
    return X


def reflectivities_from_sources(
    X: np.ndarray,
    illuminations,
    G: np.ndarray,
    support,
    shape: tuple[int, int],
    g_threshold: float = 1e-2,
    weights=None,
) -> ImageMap:
    """Divide effective sources by the incident field and average over illuminations.

    Each illumination carries its own unknown phase, so per-illumination
    estimates are rotated onto a running phase reference before averaging;
    the result is defined up to one global phase. Estimates are weighted by
    ``weights[j] * |g_f(y_i)|^2`` (pass the eigenvalues of M so that the
    noisier weak singular vectors count less). Divisions are only made where
    |g_f(y_i)| exceeds ``g_threshold`` times its maximum over the grid; pixels
    with no admissible illumination are reported unresolved.
    """
    F = np.column_stack([f.f if isinstance(f, IlluminationVector) else np.asarray(f) for f in illuminations])
    support = [int(k) for k in support]
    if not support:
        raise ValueError("empty support")
    w_ill = np.ones(F.shape[1]) if weights is None else np.asarray(weights, float)[: F.shape[1]]
    field_ = G.T @ F  # K x nu incident fields
    ok = np.abs(field_) > g_threshold * np.abs(field_).max(axis=0, keepdims=True)
    gs, ok = field_[support], ok[support]
    est = np.where(ok, X[support] / np.where(ok, gs, 1.0), 0.0)
    w = np.where(ok, np.abs(gs) ** 2 * w_ill[None, :], 0.0)

    total = np.zeros(len(support), dtype=complex)
    wsum = np.zeros(len(support))
    for j in np.argsort(-w_ill, kind="stable"):
        mask = ok[:, j]
        if not mask.any():
            continue
        overlap = mask & (wsum > 0)
        if overlap.any():
            ref = total[overlap] / wsum[overlap]
            est[:, j] *= np.exp(-1j * np.angle(np.vdot(ref * w[overlap, j], est[overlap, j])))
        total[mask] += w[mask, j] * est[mask, j]
        wsum[mask] += w[mask, j]

    values = np.zeros(shape[0] * shape[1])
    out = ImageMap(values, shape, "reflectivity-amplitude", support=support)
    for k, t, n in zip(support, total, wsum):
        if n > 0:
            out.estimates[k] = complex(t / n)
            values[k] = abs(t / n)
        else:
            out.unresolved.append(k)
    return out


def source_norm_map(X: np.ndarray, shape: tuple[int, int], support=()) -> ImageMap:
    return ImageMap(np.linalg.norm(X, axis=1), shape, "effective-source-norm", support=list(support))


def write_trace_csv(result: GelmaResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "residual", "j21"])
        for row in result.trace:
            w.writerow([row[0], repr(row[1]), repr(row[2])])
