"""End-to-end scenario runner: simulate, acquire, recover M, image, score, write artifacts."""
from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acquisition import add_intensity_noise, intensities, rng_from_seed
from .forward_model import random_scatterers, response_matrix, save_scene, sensing_matrix
from .io import export_image
from .lift import (
    Fista2Params,
    LiftedProblem,
    LiftInconsistencyError,
    amplitudes_from_lift,
    nuclear_min_reflectivity,
)
from .lowrank import CompletionParams, complete_matrix
from .metrics import compute_metrics
from .mmv import (
    GelmaParams,
    build_forward_operator,
    gelma_mmv,
    mmv_support,
    refit_on_support,
    reflectivities_from_sources,
    singular_vector_data,
    source_norm_map,
    write_trace_csv,
)
from .music import ImageMap, music_map, subspace_model
from .polarization import (
    TimeReversalMatrix,
    hermitian_symmetrize,
    make_plan,
    measure_plan,
    recover_time_reversal,
    write_matrix_csv,
    write_plan_manifest,
)
from .presets import Scenario

OUTPUT_ENV = "PHASELESS_OUTPUT"


class StageError(RuntimeError):
    """A solver failure, tagged with the pipeline stage it came from."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunResult:
    scenario: Scenario
    metrics: dict
    timings: dict = field(default_factory=dict)
    run_dir: Path | None = None
    images: dict = field(default_factory=dict)


def output_root(root=None) -> Path:
    return Path(root or os.environ.get(OUTPUT_ENV, "runs"))


def new_run_dir(root, name: str) -> Path:
    """First free ``<root>/<name>/run-NNNN``; never reuses an existing directory."""
    base = Path(root) / name
    base.mkdir(parents=True, exist_ok=True)
    k = 1
    while True:
        d = base / f"run-{k:04d}"
        try:
            d.mkdir()
            return d
        except FileExistsError:
            k += 1


def streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent Philox streams for each random stage."""
    names = ("scene", "plan", "noise", "lift")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: rng_from_seed(c) for n, c in zip(names, children)}


class _Stages:
    def __init__(self):
        self.timings = {}

    def __call__(self, stage, fn, *args, **kw):
        t = time.perf_counter()
        try:
            return fn(*args, **kw)
        except Exception as exc:
            raise StageError(stage, exc) from exc
        finally:
            self.timings[stage] = self.timings.get(stage, 0.0) + time.perf_counter() - t


def recover_matrix(P, scene_n: int, s: Scenario, rng, run):
    plan = run("plan", make_plan, s.plan, scene_n, fraction=s.fraction, seed=rng["plan"], n_edge=s.n_edge)
    powers = run("acquire", measure_plan, P, plan, s.noise, rng["noise"])
    tr = run("polarization", recover_time_reversal, powers, plan)
    tr = hermitian_symmetrize(tr)
    if s.plan == "random-pairs" and not tr.is_complete:
        params = run("completion", CompletionParams, **s.solver.get("completion", {}))
        res = run("completion", complete_matrix, tr.M, tr.known, params)
        tr = TimeReversalMatrix(res.matrix, np.ones_like(tr.known), tr.active)
    return plan, tr


def lift_amplitudes(P, G, model, support, noise, rng, params: Fista2Params) -> dict:
    """Amplitudes on ``support`` from intensities of the singular-vector illuminations."""
    a = model.active
    Pa, Ga = P[np.ix_(a, a)], G[a][:, support]
    V = model.V
    b = intensities(Pa, V)
    if noise > 0:
        b = add_intensity_noise(b, noise, rng)
    A = np.stack([build_forward_operator(V[:, j], Ga) for j in range(V.shape[1])])
    problem = LiftedProblem(A, b.values.T, tuple(support))
    res = nuclear_min_reflectivity(problem, params)
    try:
        amps, consistent = amplitudes_from_lift(res.Y), True
    except LiftInconsistencyError:
        # usually a wrong support; keep the clipped amplitudes and flag it
        amps, consistent = np.sqrt(np.clip(np.real(np.diag(res.Y)), 0.0, None)), False
    return {k: complex(v) for k, v in zip(support, amps)}, res, consistent


def run_scenario(s: Scenario, root=None, write: bool = True) -> RunResult:
    """Run one scenario; deterministic in ``s.seed``. Artifacts go to a fresh run directory."""
    run = _Stages()
    rng = streams(s.seed)
    scene = s.scene
    if not scene.scatterers:
        scene = run("scene", random_scatterers, scene, s.num_scatterers, rng["scene"], s.min_separation)
    G = run("sensing", sensing_matrix, scene)
    P = run("response", response_matrix, scene, G)
    plan, tr = recover_matrix(P, scene.num_transducers, s, rng, run)
    a = tr.active
    M_true = (P.conj().T @ P)[np.ix_(a, a)]
    result = {"M_hat": tr.submatrix(), "M_true": M_true}

    eta = s.solver.get("eta", 1e-2 if s.noise > 0 else 1e-6)
    model = run("subspace", subspace_model, tr, eta, s.solver.get("dim"), s.solver.get("noise_factor", 1.5))
    images = {}
    trace = None
    lift_info = None
    if s.pipeline in ("music", "both"):
        mm = run("music", music_map, model, scene, pairing=s.solver.get("pairing", "conjugate"), sensing=G)
        images["music"] = mm
        result["music_support"] = mm.support
        if s.solver.get("lift", True) is not False:
            lift_params = run("lift", Fista2Params, **(s.solver.get("lift") or {}))
            est, lres, consistent = run("lift", lift_amplitudes, P, G, model, mm.support, s.noise, rng["lift"], lift_params)
            result["lift_estimates"] = est
            lift_info = {"iterations": lres.iterations, "residual": lres.residual, "consistent": consistent}
            amp = np.zeros(scene.num_pixels)
            for k, v in est.items():
                amp[k] = abs(v)
            images["lift"] = ImageMap(amp, scene.grid, "lift-amplitude", support=mm.support)
    if s.pipeline in ("mmv", "both"):
        Ga = G[a]
        gp = dict(s.solver.get("gelma", {}))
        gp.setdefault("max_iters", 3000)
        if s.noise > 0:
            gp.setdefault("stall_window", 500)
        illum, B = run("mmv", singular_vector_data, model, model.dim)
        sol = run("mmv", gelma_mmv, Ga, B, run("mmv", GelmaParams, **gp))
        trace = sol
        sup = run("mmv", mmv_support, Ga, B, sol, model.dim)
        X = run("mmv", refit_on_support, Ga, B, sup)
        refl = run("mmv", reflectivities_from_sources, X, illum, Ga, sup, scene.grid, weights=model.spectrum)
        images["sources"] = source_norm_map(sol.X, scene.grid, sup)
        images["mmv"] = refl
        result["mmv_support"] = sup
        result["mmv_estimates"] = refl.estimates

    metrics = compute_metrics(scene, result)
    metrics.update(
        scenario=s.name,
        seed=s.seed,
        noise=s.noise,
        plan={"kind": plan.kind, "illuminations": len(plan), **{k: v for k, v in plan.params.items() if k != "seed"}},
        signal_dim=model.dim,
        truth_support=scene.support,
    )
    if lift_info is not None:
        metrics["music"]["lift"] = lift_info
    if trace is not None:
        metrics["mmv"]["gelma"] = {"iterations": trace.iterations, "residual": trace.residual, "stalled": trace.stalled}
    out = RunResult(s, metrics, run.timings, None, images)
    if write:
        out.run_dir = write_artifacts(out, scene, plan, tr, trace, root)
    return out


def write_artifacts(res: RunResult, scene, plan, tr, trace, root=None) -> Path:
    d = new_run_dir(output_root(root), res.scenario.name)
    save_scene(scene, d / "scene.json")
    (d / "scenario.json").write_text(json.dumps(res.scenario.to_dict(), indent=2, sort_keys=True) + "\n")
    write_plan_manifest(plan, d / "plan.csv")
    write_matrix_csv(tr, d / "matrix.csv")
    for name, img in res.images.items():
        export_image(img, d / f"{name}.csv")
        export_image(img, d / f"{name}.pgm")
    if trace is not None:
        write_trace_csv(trace, d / "gelma_trace.csv")
    (d / "metrics.json").write_text(json.dumps(res.metrics, indent=2, sort_keys=True) + "\n")
    (d / "timings.json").write_text(json.dumps(res.timings, indent=2, sort_keys=True) + "\n")
    return d


def run_many(scenarios, root=None, write: bool = True, jobs: int = 1) -> list[RunResult]:
    """Run scenarios, in worker threads when ``jobs > 1``; results keep the input order."""
    scenarios = list(scenarios)
    if jobs <= 1:
        return [run_scenario(s, root, write) for s in scenarios]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda s: run_scenario(s, root, write), scenarios))
