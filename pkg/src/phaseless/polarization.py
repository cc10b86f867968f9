"""Recover the time-reversal matrix M = P^* P from total-power measurements.

Each diagonal entry is the power received when one transducer fires. Each
off-diagonal pair (i, j) needs two more illuminations, e_i + e_j and
e_i - 1j e_j, combined through the complex polarization identity.
"""
from __future__ import annotations

import csv
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .acquisition import (
    IlluminationVector,
    add_intensity_noise,
    intensities,
    power_from_intensities,
    rng_from_seed,
)


class MissingMeasurementError(ValueError):
    pass


@dataclass(frozen=True)
class IlluminationPlan:
    """Ordered illuminations plus the pairs (i < j) whose entries they determine."""

    n: int
    kind: str
    active: np.ndarray
    pairs: np.ndarray  # shape (P, 2), zero-based, i < j
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.active) + 2 * len(self.pairs)

    @property
    def tags(self) -> list[str]:
        out = [f"e{i}" for i in self.active]
        for i, j in self.pairs:
            out += [f"e{i}+e{j}", f"e{i}-ie{j}"]
        return out

    def illuminations(self) -> list[IlluminationVector]:
        cols = self.matrix()
        kinds = ["single"] * len(self.active) + ["pair-sum", "pair-quadrature"] * len(self.pairs)
        idx = [(int(i), -1) for i in self.active] + [
            (int(i), int(j)) for i, j in self.pairs for _ in range(2)
        ]
        return [IlluminationVector(cols[:, c], k, i, j) for c, (k, (i, j)) in enumerate(zip(kinds, idx))]

    def matrix(self) -> np.ndarray:
        """All illuminations as the columns of an N x len(plan) matrix."""
        n_single = len(self.active)
        F = np.zeros((self.n, len(self)), dtype=complex)
        F[self.active, np.arange(n_single)] = 1.0
        if len(self.pairs):
            c = n_single + 2 * np.arange(len(self.pairs))
            i, j = self.pairs[:, 0], self.pairs[:, 1]
            F[i, c] = 1.0
            F[j, c] = 1.0
            F[i, c + 1] = 1.0
            F[j, c + 1] = -1j
        return F


def _all_pairs(idx: np.ndarray) -> np.ndarray:
    a, b = np.triu_indices(len(idx), k=1)
    return np.column_stack([idx[a], idx[b]]).astype(int)


def make_plan(kind: str, n: int, fraction: float = 1.0, seed=0, n_edge: int = 0) -> IlluminationPlan:
    """Build a ``full``, ``random-pairs`` or ``edges`` illumination plan for N = n transducers."""
    everyone = np.arange(n)
    if kind == "full":
        return IlluminationPlan(n, kind, everyone, _all_pairs(everyone))
    if kind == "random-pairs":
        if not 0.0 < fraction <= 1.0:
            raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
        pairs = _all_pairs(everyone)
        count = int(round(fraction * len(pairs)))
        pick = np.sort(rng_from_seed(seed).choice(len(pairs), size=count, replace=False))
        return IlluminationPlan(n, kind, everyone, pairs[pick], {"fraction": fraction, "seed": seed})
    if kind == "edges":
        if not 1 <= n_edge <= n // 2:
            raise ValueError(f"n_edge must lie in [1, {n // 2}], got {n_edge}")
        active = np.concatenate([np.arange(n_edge), np.arange(n - n_edge, n)])
        return IlluminationPlan(n, kind, active, _all_pairs(active), {"n_edge": n_edge})
    raise ValueError(f"unknown plan kind {kind!r}")


def measure_plan(P: np.ndarray, plan: IlluminationPlan, eps: float = 0.0, seed=None) -> np.ndarray:
    """Total power for every planned illumination, noise applied per receiver before summing."""
    b = intensities(P, plan.matrix())
    if eps > 0:
        b = add_intensity_noise(b, eps, seed)
    return power_from_intensities(b.values)


@dataclass
class TimeReversalMatrix:
    """N x N matrix with a mask of recovered entries and the participating transducers."""

    M: np.ndarray
    known: np.ndarray
    active: np.ndarray

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def is_complete(self) -> bool:
        return bool(self.known.all())

    def submatrix(self) -> np.ndarray:
        """Principal submatrix over the active transducers."""
        return self.M[np.ix_(self.active, self.active)]


def recover_time_reversal(powers, plan: IlluminationPlan) -> TimeReversalMatrix:
    """Assemble M from plan-ordered powers (array) or a ``{tag: power}`` mapping."""
    if isinstance(powers, Mapping):
        powers = np.array([powers.get(t, np.nan) for t in plan.tags], dtype=float)
    else:
        powers = np.asarray(powers, dtype=float)
    if powers.shape != (len(plan),):
        raise MissingMeasurementError(f"expected {len(plan)} powers, got {powers.shape}")
    if np.isnan(powers).any():
        missing = [t for t, p in zip(plan.tags, powers) if np.isnan(p)]
        raise MissingMeasurementError(f"missing measurements: {missing[:5]}")

    n, n_single = plan.n, len(plan.active)
    M = np.zeros((n, n), dtype=complex)
    known = np.zeros((n, n), dtype=bool)
    diag = np.zeros(n)
    diag[plan.active] = powers[:n_single]
    M[plan.active, plan.active] = diag[plan.active]
    known[plan.active, plan.active] = True
    if len(plan.pairs):
        i, j = plan.pairs[:, 0], plan.pairs[:, 1]
        p_sum = powers[n_single::2]
        p_quad = powers[n_single + 1::2]
        re = 0.5 * (p_sum - diag[i] - diag[j])
        im = 0.5 * (p_quad - diag[i] - diag[j])
        M[i, j] = re + 1j * im
        M[j, i] = re - 1j * im
        known[i, j] = known[j, i] = True
    return TimeReversalMatrix(M, known, np.asarray(plan.active))


def hermitian_symmetrize(tr: TimeReversalMatrix) -> TimeReversalMatrix:
    both = tr.known & tr.known.T
    M = np.where(both, 0.5 * (tr.M + tr.M.conj().T), tr.M)
    return TimeReversalMatrix(M, tr.known.copy(), tr.active.copy())


def write_matrix_csv(tr: TimeReversalMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "re", "im", "known"])
        for i in range(tr.n):
            for j in range(tr.n):
                z = tr.M[i, j]
                w.writerow([i, j, repr(float(z.real)), repr(float(z.imag)), int(tr.known[i, j])])


def read_matrix_csv(path) -> TimeReversalMatrix:
    rows = list(csv.DictReader(open(path, newline="")))
    n = max(int(r["i"]) for r in rows) + 1
    M = np.zeros((n, n), dtype=complex)
    known = np.zeros((n, n), dtype=bool)
    for r in rows:
        i, j = int(r["i"]), int(r["j"])
        M[i, j] = complex(float(r["re"]), float(r["im"]))
        known[i, j] = bool(int(r["known"]))
    active = np.flatnonzero(known.diagonal())
    return TimeReversalMatrix(M, known, active)


def write_plan_manifest(plan: IlluminationPlan, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["illumination_id", "tag"])
        for k, t in enumerate(plan.tags):
            w.writerow([k, t])


def write_measurements_csv(P: np.ndarray, plan: IlluminationPlan, path, eps: float = 0.0, seed=None) -> np.ndarray:
    """Per-receiver intensities for every illumination; returns the matching total powers."""
    b = intensities(P, plan.matrix())
    if eps > 0:
        b = add_intensity_noise(b, eps, seed)
    vals = b.values
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["illumination_id", "receiver_index", "intensity"])
        for k in range(vals.shape[1]):
            for r in range(vals.shape[0]):
                w.writerow([k, r, repr(float(vals[r, k]))])
    return power_from_intensities(vals)


def read_measurements_csv(path, num_illuminations: int | None = None) -> np.ndarray:
    """Total power per illumination from a per-receiver intensity CSV."""
    with open(path, newline="") as fh:
        rows = [(int(r["illumination_id"]), int(r["receiver_index"]), float(r["intensity"])) for r in csv.DictReader(fh)]
    size = num_illuminations if num_illuminations is not None else max(k for k, _, _ in rows) + 1
    n = max(r for _, r, _ in rows) + 1
    vals = np.full((n, size), np.nan)
    for k, r, v in rows:
        vals[r, k] = v
    return power_from_intensities(vals)
