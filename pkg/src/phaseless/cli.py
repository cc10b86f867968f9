"""Command-line entry point: ``phaseless <command> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .forward_model import load_scene, random_scatterers, response_matrix, save_scene, sensing_matrix, SceneConfig
from .io import export_image
from .lift import Fista2Params
from .lowrank import complete_matrix
from .mmv import (
    GelmaParams,
    gelma_mmv,
    refit_on_support,
    reflectivities_from_sources,
    singular_vector_data,
    source_norm_map,
    mmv_support,
)
from .music import music_map, subspace_model
from .pipeline import StageError, lift_amplitudes, output_root, run_many
from .polarization import (
    TimeReversalMatrix,
    hermitian_symmetrize,
    make_plan,
    read_matrix_csv,
    read_measurements_csv,
    recover_time_reversal,
    write_matrix_csv,
    write_measurements_csv,
    write_plan_manifest,
)
from .presets import PRESETS, describe, get_preset, load_scenario


def _write_complex_csv(A, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "re", "im"])
        for (i, j), z in np.ndenumerate(A):
            w.writerow([i, j, repr(float(z.real)), repr(float(z.imag))])


def _scene(args) -> SceneConfig:
    scene = load_scene(args.scene) if args.scene else SceneConfig()
    if not scene.scatterers:
        scene = random_scatterers(scene, args.scatterers, np.random.Generator(np.random.Philox(args.seed)))
    return scene


def _load_plan(folder: Path):
    info = json.loads((folder / "plan.json").read_text())
    return make_plan(info["kind"], info["n"], info.get("fraction", 1.0), info.get("seed", 0), info.get("n_edge", 0))


def cmd_list(args):
    for name in sorted(PRESETS):
        print(describe(PRESETS[name]))


def cmd_simulate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scene = _scene(args)
    P = response_matrix(scene)
    save_scene(scene, out / "scene.json")
    _write_complex_csv(P, out / "response.csv")
    M = P.conj().T @ P
    write_matrix_csv(TimeReversalMatrix(M, np.ones(M.shape, bool), np.arange(M.shape[0])), out / "oracle_matrix.csv")
    print(f"scene with {len(scene.scatterers)} scatterers written to {out}")


def cmd_acquire(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scene = load_scene(args.scene)
    n = scene.num_transducers
    info = {"kind": args.plan, "n": n, "fraction": args.fraction, "seed": args.seed, "n_edge": args.n_edge}
    plan = make_plan(args.plan, n, args.fraction, args.seed, args.n_edge)
    (out / "plan.json").write_text(json.dumps(info, indent=2) + "\n")
    write_plan_manifest(plan, out / "plan.csv")
    powers = write_measurements_csv(response_matrix(scene), plan, out / "measurements.csv", args.noise, args.seed)
    print(f"{len(plan)} illuminations, total power {powers.sum():.6g}, written to {out}")


def cmd_recover(args):
    folder = Path(args.measurements)
    plan = _load_plan(folder)
    powers = read_measurements_csv(folder / "measurements.csv", len(plan))
    tr = hermitian_symmetrize(recover_time_reversal(powers, plan))
    if args.complete and not tr.is_complete:
        res = complete_matrix(tr.M, tr.known)
        print(f"completion: {res.iterations} iterations, residual {res.residual:.3g}, rank {res.rank}")
        tr = TimeReversalMatrix(res.matrix, np.ones_like(tr.known), tr.active)
    write_matrix_csv(tr, args.out)
    print(f"matrix written to {args.out} ({int(tr.known.sum())} known entries)")


def cmd_image(args):
    scene = load_scene(args.scene)
    tr = read_matrix_csv(args.matrix)
    model = subspace_model(tr, args.eta, args.dim)
    G = sensing_matrix(scene)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    if args.method == "music":
        img = music_map(model, scene, sensing=G)
    else:
        _, B = singular_vector_data(model, model.dim)
        sol = gelma_mmv(G[model.active], B, GelmaParams(max_iters=args.max_iters))
        img = source_norm_map(sol.X, scene.grid, mmv_support(G[model.active], B, sol, model.dim))
    for fmt in ("csv", "pgm"):
        export_image(img, prefix.with_suffix(f".{fmt}"))
    print(json.dumps({"support": img.support, "signal_dim": model.dim}))


def cmd_reflectivity(args):
    scene = load_scene(args.scene)
    tr = read_matrix_csv(args.matrix)
    model = subspace_model(tr, args.eta, args.dim)
    G = sensing_matrix(scene)
    Ga = G[model.active]
    if args.method == "mmv":
        illum, B = singular_vector_data(model, model.dim)
        sol = gelma_mmv(Ga, B, GelmaParams(max_iters=args.max_iters))
        sup = mmv_support(Ga, B, sol, model.dim)
        img = reflectivities_from_sources(refit_on_support(Ga, B, sup), illum, Ga, sup, scene.grid, weights=model.spectrum)
        est = img.estimates
    else:
        sup = music_map(model, scene, sensing=G).support
        rng = np.random.Generator(np.random.Philox(args.seed))
        est, _, _ = lift_amplitudes(response_matrix(scene, G), G, model, sup, args.noise, rng, Fista2Params())
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ix", "iy", "re", "im", "abs"])
        for k in sorted(est):
            ix, iy = scene.pixel_coords(k)
            z = est[k]
            w.writerow([ix, iy, repr(z.real), repr(z.imag), repr(abs(z))])
    print(f"{len(est)} estimates written to {args.out}")


def cmd_run(args):
    if args.config:
        base = load_scenario(args.config)
    elif args.preset:
        base = get_preset(args.preset)
    else:
        raise SystemExit("run needs a preset name or --config")
    seed0 = args.seed if args.seed is not None else base.seed
    scenarios = [base.with_seed(seed0 + k) for k in range(args.repeats)]
    results = run_many(scenarios, args.output, write=not args.no_write, jobs=args.jobs)
    for r in results:
        m = r.metrics
        parts = [f"{m['scenario']} seed={m['seed']}"]
        for stage in ("music", "mmv"):
            if stage in m:
                parts.append(f"{stage}: exact={m[stage]['support_exact']} dist={m[stage]['support_distance']:.2f}")
        if "mmv" in m:
            parts.append(f"refl_err={m['mmv']['reflectivity_relative_error']['max']:.3g}")
        parts.append(f"M_err={m['matrix_recovery_error']:.3g}")
        if r.run_dir:
            parts.append(str(r.run_dir))
        print(" | ".join(parts))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phaseless", description="Imaging point scatterers from intensity-only data.")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--output", default=None, help="output root (default $PHASELESS_OUTPUT or ./runs)")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("list-presets").set_defaults(func=cmd_list)

    s = sub.add_parser("simulate", help="write a scene, its response matrix P and the oracle M = P^* P")
    s.add_argument("--scene", help="scene JSON; random scatterers are drawn if it lists none")
    s.add_argument("--scatterers", type=int, default=5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("acquire", help="measure per-receiver intensities for an illumination plan")
    s.add_argument("--scene", required=True)
    s.add_argument("--plan", choices=["full", "random-pairs", "edges"], default="full")
    s.add_argument("--fraction", type=float, default=1.0)
    s.add_argument("--n-edge", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_acquire)

    s = sub.add_parser("recover-m", help="time-reversal matrix from measured intensities")
    s.add_argument("--measurements", required=True, help="folder written by acquire")
    s.add_argument("--complete", action="store_true", help="fill missing entries by matrix completion")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_recover)

    for name, fn, methods in (("image", cmd_image, ("music", "mmv")), ("reflectivity", cmd_reflectivity, ("mmv", "lift"))):
        s = sub.add_parser(name)
        s.add_argument("method", choices=methods)
        s.add_argument("--matrix", required=True)
        s.add_argument("--scene", required=True)
        s.add_argument("--eta", type=float, default=1e-6)
        s.add_argument("--dim", type=int, default=None)
        s.add_argument("--max-iters", type=int, default=3000)
        s.add_argument("--out", required=True)
        if name == "reflectivity":
            s.add_argument("--noise", type=float, default=0.0, help="noise on the lift intensities")
        s.set_defaults(func=fn)

    s = sub.add_parser("run", help="run a preset or a scenario file end to end")
    s.add_argument("preset", nargs="?")
    s.add_argument("--config")
    s.add_argument("--repeats", type=int, default=1, help="run seeds seed, seed+1, ...")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--no-write", action="store_true")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command in ("simulate", "acquire", "reflectivity") and args.seed is None:
        args.seed = 0
    if args.output is not None:
        args.output = str(output_root(args.output))
    try:
        args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
