"""Scoring a reconstruction against the ground-truth scene."""
from __future__ import annotations

import numpy as np

from .forward_model import SceneConfig


def grid_diameter(scene: SceneConfig) -> float:
    nx, ny = scene.grid
    return float(np.hypot(nx - 1, ny - 1))


def match_support(truth: SceneConfig, support) -> tuple[list[tuple[int, int, float]], list[int], list[int]]:
    """Greedy matching of estimated to true pixels by grid-cell distance.

    Returns ``(pairs, missed_true, spurious)`` with pairs ``(true_k, est_k, dist)``.
    """
    true = truth.support
    est = sorted(int(k) for k in support)
    if not true or not est:
        return [], list(true), est
    tc = np.array([truth.pixel_coords(k) for k in true], float)
    ec = np.array([truth.pixel_coords(k) for k in est], float)
    d = np.hypot(*(tc[:, None, :] - ec[None, :, :]).transpose(2, 0, 1))
    order = np.argsort(d, axis=None, kind="stable")
    used_t, used_e, pairs = set(), set(), []
    for flat in order:
        a, b = divmod(int(flat), len(est))
        if a in used_t or b in used_e:
            continue
        used_t.add(a)
        used_e.add(b)
        pairs.append((true[a], est[b], float(d[a, b])))
    missed = [true[a] for a in range(len(true)) if a not in used_t]
    spurious = [est[b] for b in range(len(est)) if b not in used_e]
    return sorted(pairs), missed, spurious


def support_metrics(truth: SceneConfig, support) -> dict:
    pairs, missed, spurious = match_support(truth, support)
    dist = sum(p[2] for p in pairs) + grid_diameter(truth) * (len(missed) + len(spurious))
    return {
        "support": sorted(int(k) for k in support),
        "support_exact": sorted(int(k) for k in support) == truth.support,
        "support_distance": float(dist),
        "missed": missed,
        "spurious": spurious,
    }


def reflectivity_errors(truth: SceneConfig, estimates: dict) -> dict:
    """|(|est| - |true|)| / |true| per true scatterer; a pixel with no estimate counts as zero."""
    per = {}
    for s in truth.scatterers:
        k = truth.pixel_index(s.ix, s.iy)
        est = abs(estimates.get(k, 0.0))
        per[str(k)] = float(abs(est - abs(s.reflectivity)) / abs(s.reflectivity))
    return {"per_scatterer": per, "max": max(per.values(), default=0.0)}


def matrix_error(M_hat: np.ndarray, M_true: np.ndarray) -> float:
    denom = np.linalg.norm(M_true)
    if denom == 0:
        return float(np.linalg.norm(M_hat))
    return float(np.linalg.norm(M_hat - M_true) / denom)


def compute_metrics(truth: SceneConfig, result: dict) -> dict:
    """Metrics for a pipeline result dict.

    ``result`` may hold ``music_support``, ``mmv_support``, ``mmv_estimates``,
    ``lift_estimates`` (amplitudes keyed by pixel) and ``M_hat`` / ``M_true``.
    """
    out = {}
    for stage in ("music", "mmv"):
        if f"{stage}_support" in result:
            out[stage] = support_metrics(truth, result[f"{stage}_support"])
    if "mmv_estimates" in result:
        out["mmv"]["reflectivity_relative_error"] = reflectivity_errors(truth, result["mmv_estimates"])
    if "lift_estimates" in result:
        out["music"]["amplitude_relative_error"] = reflectivity_errors(truth, result["lift_estimates"])
    if "M_hat" in result:
        out["matrix_recovery_error"] = matrix_error(result["M_hat"], result["M_true"])
    return out
