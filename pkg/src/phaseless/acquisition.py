"""What a phaseless array can observe: per-receiver intensities and total power."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("single", "pair-sum", "pair-quadrature", "singular-vector", "custom")


@dataclass(frozen=True)
class IlluminationVector:
    """Signals sent from the N transducers, tagged with how they were built.

    ``i`` and ``j`` are zero-based transducer indices for the canonical kinds
    (``j`` is the singular-vector rank for ``singular-vector``).
    """

    f: np.ndarray
    kind: str = "custom"
    i: int = -1
    j: int = -1

    @property
    def tag(self) -> str:
        if self.kind == "single":
            return f"e{self.i}"
        if self.kind == "pair-sum":
            return f"e{self.i}+e{self.j}"
        if self.kind == "pair-quadrature":
            return f"e{self.i}-ie{self.j}"
        if self.kind == "singular-vector":
            return f"v{self.j}"
        return "custom"


@dataclass(frozen=True)
class IntensityVector:
    values: np.ndarray
    noise_level: float = 0.0


def rng_from_seed(seed) -> np.random.Generator:
    """Counter-based stream: same seed and draw order give the same numbers everywhere."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def illumination_basis(kind: str, i: int, j: int = -1, n: int = 0) -> IlluminationVector:
    """Canonical illuminations e_i, e_i + e_j and e_i - 1j e_j (zero-based indices)."""
    if not 0 <= i < n:
        raise IndexError(f"transducer index {i} out of range for N={n}")
    f = np.zeros(n, dtype=complex)
    f[i] = 1.0
    if kind == "single":
        return IlluminationVector(f, kind, i)
    if kind not in ("pair-sum", "pair-quadrature"):
        raise ValueError(f"unknown illumination kind {kind!r}")
    if not 0 <= j < n:
        raise IndexError(f"transducer index {j} out of range for N={n}")
    if i == j:
        raise ValueError("pair illuminations need two distinct transducers")
    f[j] = 1.0 if kind == "pair-sum" else -1j
    return IlluminationVector(f, kind, i, j)


def _as_array(f) -> np.ndarray:
    return f.f if isinstance(f, IlluminationVector) else np.asarray(f)


def intensities(P: np.ndarray, f) -> IntensityVector:
    """|(P f)_i|^2 at every receiver. ``f`` may also be an N x n block of illuminations."""
    f = _as_array(f)
    if P.shape[1] != f.shape[0]:
        raise ValueError(f"illumination length {f.shape[0]} does not match N={P.shape[1]}")
    data = P @ f
    return IntensityVector(data.real ** 2 + data.imag ** 2)


def power_from_intensities(values: np.ndarray) -> float | np.ndarray:
    """Sum receiver intensities in receiver-index order (one column per illumination)."""
    values = np.asarray(values, float)
    if values.ndim == 1:
        return float(values.reshape(-1, 1).sum(axis=0)[0])
    return values.sum(axis=0)


def total_power(P: np.ndarray, f) -> float | np.ndarray:
    """Received power summed over the array; equals ``power_from_intensities(intensities(P, f).values)``."""
    return power_from_intensities(intensities(P, f).values)


def add_intensity_noise(b: IntensityVector | np.ndarray, eps: float, seed=None) -> IntensityVector:
    """Replace each intensity by a draw uniform on [(1 - eps) b, (1 + eps) b]."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"noise strength must lie in [0, 1), got {eps}")
    values = b.values if isinstance(b, IntensityVector) else np.asarray(b, float)
    if eps == 0.0:
        return IntensityVector(values.copy(), 0.0)
    u = rng_from_seed(seed).uniform(-1.0, 1.0, size=values.shape)
    return IntensityVector(values * (1.0 + eps * u), eps)
