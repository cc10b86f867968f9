"""Named scenarios for the standard experiments, plus JSON scenario files."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .forward_model import scene_from_dict, scene_to_dict, SceneConfig

PIPELINES = ("music", "mmv", "both")


@dataclass(frozen=True)
class Scenario:
    """One experiment: geometry, how many random scatterers, acquisition plan, noise and solvers.

    ``scene`` fixes the geometry; if it already lists scatterers they are
    used as-is, otherwise ``num_scatterers`` are drawn from the scene stream.
    ``solver`` holds overrides keyed by stage (``eta``, ``gelma``,
    ``completion``, ``lift``).
    """

    name: str
    num_scatterers: int = 5
    plan: str = "full"
    fraction: float = 1.0
    n_edge: int = 0
    noise: float = 0.0
    pipeline: str = "both"
    seed: int = 0
    scene: SceneConfig = field(default_factory=SceneConfig)
    solver: dict = field(default_factory=dict)
    min_separation: float = 3.0

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ValueError(f"pipeline must be one of {PIPELINES}")
        if self.plan not in ("full", "random-pairs", "edges"):
            raise ValueError(f"unknown plan kind {self.plan!r}")
        if not 0.0 <= self.noise < 1.0:
            raise ValueError("noise must lie in [0, 1)")
        if self.num_scatterers < 0:
            raise ValueError("num_scatterers must be non-negative")

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scene"] = scene_to_dict(self.scene)
        return d


def scenario_from_dict(data: dict) -> Scenario:
    data = dict(data)
    if "preset" in data:
        base = get_preset(data.pop("preset"))
        if "scene" in data:
            data["scene"] = scene_from_dict(data["scene"])
        return replace(base, **data)
    if "scene" in data:
        data["scene"] = scene_from_dict(data["scene"])
    if "name" not in data:
        raise ValueError("scenario needs a name")
    return Scenario(**data)


def load_scenario(path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))


def _build() -> dict[str, Scenario]:
    out = {
        "fig1a": Scenario("fig1a", num_scatterers=5),
        "fig1b": Scenario("fig1b", num_scatterers=9),
        "fig2": Scenario("fig2", num_scatterers=7, noise=0.10),
        "fig3": Scenario("fig3", num_scatterers=7, noise=0.20),
        "fig4": Scenario("fig4", num_scatterers=7, plan="random-pairs", fraction=0.5, noise=0.05),
    }
    for e in (4, 16, 28):
        out[f"fig6_e{e}"] = Scenario(f"fig6_e{e}", num_scatterers=6, plan="edges", n_edge=e)
    for e in range(4, 25, 4):
        out[f"fig7_e{e}"] = Scenario(f"fig7_e{e}", num_scatterers=6, plan="edges", n_edge=e, noise=0.05, pipeline="music")
    for eps in (0.10, 0.20):
        for e in (4, 12, 24):
            name = f"fig8_e{e}_n{int(round(eps * 100)):02d}"
            out[name] = Scenario(name, num_scatterers=6, plan="edges", n_edge=e, noise=eps, pipeline="music")
    return out


PRESETS = _build()
ALIASES = {
    "fig1_5scatterers": "fig1a",
    "fig1_9scatterers": "fig1b",
    "fig4_completion": "fig4",
}


def get_preset(name: str) -> Scenario:
    key = ALIASES.get(name, name)
    if key not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; see list-presets")
    return PRESETS[key]


def describe(s: Scenario) -> str:
    plan = s.plan
    if s.plan == "random-pairs":
        plan += f" {s.fraction:.0%}"
    elif s.plan == "edges":
        plan += f" {s.n_edge}/edge"
    return f"{s.name}: {s.num_scatterers} scatterers, {plan}, noise {s.noise:.2f}, {s.pipeline}"
