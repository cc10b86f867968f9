"""MUSIC imaging from the signal subspace of the time-reversal matrix."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forward_model import SceneConfig, sensing_matrix
from .polarization import TimeReversalMatrix

PAIRINGS = ("conjugate", "transpose")


class NoSignalError(ValueError):
    pass


@dataclass(frozen=True)
class SubspaceModel:
    """Leading right singular vectors (columns of ``V``) of a Hermitian PSD matrix.

    ``spectrum`` holds the eigenvalues clipped at zero, in descending order.
    ``noise_edge`` is the magnitude of the most negative eigenvalue, which a
    PSD matrix can only have through measurement noise.
    """

    V: np.ndarray
    spectrum: np.ndarray
    active: np.ndarray
    noise_edge: float = 0.0

    @property
    def dim(self) -> int:
        return self.V.shape[1]


@dataclass
class ImageMap:
    """One real value per grid pixel, row-major in range (``k = iy * nx + ix``)."""

    values: np.ndarray
    shape: tuple[int, int]
    kind: str = "music"
    support: list[int] = field(default_factory=list)
    estimates: dict[int, complex] = field(default_factory=dict)
    unresolved: list[int] = field(default_factory=list)

    def as_grid(self) -> np.ndarray:
        nx, ny = self.shape
        return self.values.reshape(ny, nx)


def estimate_signal_dim(spectrum: np.ndarray, eta: float, noise_floor: float = 0.0) -> int:
    """Number of entries of a descending spectrum above ``max(eta * spectrum[0], noise_floor)``."""
    spectrum = np.asarray(spectrum, float)
    if spectrum.size == 0 or spectrum[0] <= 0:
        return 0
    return int(np.count_nonzero(spectrum > max(eta * spectrum[0], noise_floor)))


def _as_matrix(M) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(M, TimeReversalMatrix):
        return M.submatrix(), np.asarray(M.active)
    M = np.asarray(M)
    return M, np.arange(M.shape[0])


def subspace_model(M, eta: float = 1e-6, dim: int | None = None, noise_factor: float = 1.5) -> SubspaceModel:
    """Signal subspace of a Hermitian matrix (or the active block of a ``TimeReversalMatrix``).

    Without an explicit ``dim`` the signal dimension counts eigenvalues above
    both ``eta`` times the largest and ``noise_factor`` times the noise edge.
    """
    A, active = _as_matrix(M)
    scale = np.linalg.norm(A)
    if scale == 0:
        raise NoSignalError("no signal subspace: matrix is zero")
    lam, Q = np.linalg.eigh(A / scale)
    order = np.argsort(lam)[::-1]
    noise_edge = max(-lam.min(), 0.0) * scale
    spectrum = np.clip(lam[order], 0.0, None) * scale
    Q = Q[:, order]
    if dim is None:
        m = estimate_signal_dim(spectrum, eta, noise_factor * noise_edge)
    else:
        m = int(dim)
    if m < 1:
        raise NoSignalError("no signal subspace: empty spectrum above threshold")
    if m > A.shape[0]:
        raise ValueError(f"signal dimension {m} exceeds matrix size {A.shape[0]}")
    return SubspaceModel(Q[:, :m], spectrum, active, noise_edge)


def model_from_response(P: np.ndarray, eta: float = 1e-6, dim: int | None = None) -> SubspaceModel:
    """Subspace from the right singular vectors of a full-phase response matrix."""
    U, s, Vh = np.linalg.svd(P)
    spectrum = s ** 2
    m = estimate_signal_dim(spectrum, eta) if dim is None else int(dim)
    return SubspaceModel(Vh.conj().T[:, :m], spectrum, np.arange(P.shape[0]))


def noise_space_projection(g: np.ndarray, model: SubspaceModel, pairing: str = "conjugate") -> np.ndarray:
    """g - sum_j (g^T V_j) W_j with W_j = conj(V_j) ("conjugate") or V_j ("transpose").

    ``g`` may be a single Green's vector or a block with one vector per column.
    """
    g = np.asarray(g)
    if g.shape[0] != model.V.shape[0]:
        raise ValueError(f"vector length {g.shape[0]} does not match subspace dimension {model.V.shape[0]}")
    if pairing not in PAIRINGS:
        raise ValueError(f"pairing must be one of {PAIRINGS}")
    if model.dim == 0:
        return g.copy()
    coeff = model.V.T @ g
    W = model.V.conj() if pairing == "conjugate" else model.V
    return g - W @ coeff


def music_values(G: np.ndarray, model: SubspaceModel, pairing: str = "conjugate", floor: float = 1e-8) -> np.ndarray:
    """min_j |P g_j| / |P g_s| per pixel.

    Projection norms are floored at ``floor`` times the largest |g| on the grid,
    so exact zeros (noise-free scatterer pixels) all map to 1.
    """
    norms = np.linalg.norm(noise_space_projection(G, model, pairing), axis=0)
    norms = np.maximum(norms, floor * np.linalg.norm(G, axis=0).max())
    return norms.min() / norms


def music_map(
    M,
    scene: SceneConfig,
    eta: float = 1e-6,
    dim: int | None = None,
    pairing: str = "conjugate",
    floor: float = 1e-8,
    sensing: np.ndarray | None = None,
    noise_factor: float = 1.5,
) -> ImageMap:
    """MUSIC image over the scene grid; the support holds the ``dim`` (or estimated) top pixels."""
    model = M if isinstance(M, SubspaceModel) else subspace_model(M, eta, dim, noise_factor)
    G = sensing if sensing is not None else sensing_matrix(scene)
    values = music_values(G[model.active], model, pairing, floor)
    out = ImageMap(values, scene.grid, "music")
    out.support = extract_support(out, model.dim)
    return out


def extract_support(image: ImageMap, m: int) -> list[int]:
    """Indices of the ``m`` largest values; ties go to the lowest linear index."""
    if m < 1:
        raise ValueError("support size must be at least 1")
    if m > image.values.size:
        raise ValueError(f"cannot pick {m} pixels from {image.values.size}")
    order = np.argsort(-image.values, kind="stable")
    return sorted(int(k) for k in order[:m])
