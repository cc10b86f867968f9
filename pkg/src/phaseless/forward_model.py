"""Scene geometry, free-space Green's functions and the synthetic array response.

Lengths are in wavelengths (lambda = 1, so kappa = 2 pi). The array lies on the
line z = 0 along the cross-range axis x; the image window is a uniform grid
centred at range ``distance``. Scatterers sit on grid points.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

WAVELENGTH = 1.0
WAVENUMBER = 2 * np.pi / WAVELENGTH


class SingularEvaluationError(ValueError):
    """Raised when a Green's function is evaluated at coincident points."""


@dataclass(frozen=True)
class Scatterer:
    ix: int
    iy: int
    reflectivity: complex


@dataclass(frozen=True)
class SceneConfig:
    """Array geometry, image-window grid and the ground-truth scatterers.

    Grid points are indexed linearly as ``k = iy * nx + ix`` with ``ix`` along
    cross-range and ``iy`` along range.
    """

    num_transducers: int = 100
    spacing: float = 1.0
    distance: float = 100.0
    window: tuple[float, float] = (30.0, 30.0)
    grid: tuple[int, int] = (30, 30)
    scatterers: tuple[Scatterer, ...] = field(default_factory=tuple)
    wavenumber: float = WAVENUMBER

    def __post_init__(self):
        nx, ny = self.grid
        if self.num_transducers < 1:
            raise ValueError("need at least one transducer")
        if nx < 1 or ny < 1:
            raise ValueError("grid must have at least one point")
        if self.spacing <= 0 or min(self.window) <= 0:
            raise ValueError("spacing and window extent must be positive")
        seen = set()
        for s in self.scatterers:
            if not (0 <= s.ix < nx and 0 <= s.iy < ny):
                raise ValueError(f"scatterer ({s.ix}, {s.iy}) outside the {nx}x{ny} grid")
            if (s.ix, s.iy) in seen:
                raise ValueError(f"duplicate scatterer at ({s.ix}, {s.iy})")
            seen.add((s.ix, s.iy))

    @property
    def num_pixels(self) -> int:
        return self.grid[0] * self.grid[1]

    @property
    def grid_step(self) -> tuple[float, float]:
        return self.window[0] / self.grid[0], self.window[1] / self.grid[1]

    @property
    def transducer_positions(self) -> np.ndarray:
        n = self.num_transducers
        x = (np.arange(n) - (n - 1) / 2) * self.spacing
        return np.column_stack([x, np.zeros(n)])

    @property
    def grid_points(self) -> np.ndarray:
        nx, ny = self.grid
        hx, hy = self.grid_step
        x = (np.arange(nx) - (nx - 1) / 2) * hx
        z = self.distance + (np.arange(ny) - (ny - 1) / 2) * hy
        xx, zz = np.meshgrid(x, z)  # shape (ny, nx): row-major in iy
        return np.column_stack([xx.ravel(), zz.ravel()])

    def pixel_index(self, ix: int, iy: int) -> int:
        return iy * self.grid[0] + ix

    def pixel_coords(self, k: int) -> tuple[int, int]:
        iy, ix = divmod(int(k), self.grid[0])
        return ix, iy

    @property
    def support(self) -> list[int]:
        return sorted(self.pixel_index(s.ix, s.iy) for s in self.scatterers)

    def with_scatterers(self, scatterers) -> "SceneConfig":
        return replace(self, scatterers=tuple(scatterers))


def green(x, y, wavenumber: float = WAVENUMBER) -> complex:
    """exp(i kappa r) / (4 pi r) for r = |x - y|."""
    r = float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))
    if r == 0.0:
        raise SingularEvaluationError("Green's function evaluated at coincident points")
    return complex(np.exp(1j * wavenumber * r) / (4 * np.pi * r))


def _green_block(sources: np.ndarray, targets: np.ndarray, wavenumber: float) -> np.ndarray:
    diff = sources[:, None, :] - targets[None, :, :]
    r = np.sqrt((diff ** 2).sum(axis=-1))
    if np.any(r == 0.0):
        raise SingularEvaluationError("a grid point coincides with a transducer")
    return np.exp(1j * wavenumber * r) / (4 * np.pi * r)


def green_vector(y, scene: SceneConfig) -> np.ndarray:
    """Illumination vector targeting ``y``: entry s is G(x_s, y)."""
    y = np.asarray(y, float).reshape(1, 2)
    return _green_block(scene.transducer_positions, y, scene.wavenumber)[:, 0]


def sensing_matrix(scene: SceneConfig) -> np.ndarray:
    """N x K matrix whose column j is the Green's vector of grid point j."""
    return _green_block(scene.transducer_positions, scene.grid_points, scene.wavenumber)


def reflectivity_vector(scene: SceneConfig) -> np.ndarray:
    rho = np.zeros(scene.num_pixels, dtype=complex)
    for s in scene.scatterers:
        rho[scene.pixel_index(s.ix, s.iy)] = s.reflectivity
    return rho


def response_matrix(scene: SceneConfig, sensing: np.ndarray | None = None) -> np.ndarray:
    """Born-approximation response P = G diag(rho) G^T (complex symmetric)."""
    n = scene.num_transducers
    if not scene.scatterers:
        return np.zeros((n, n), dtype=complex)
    idx = [scene.pixel_index(s.ix, s.iy) for s in scene.scatterers]
    alpha = np.array([s.reflectivity for s in scene.scatterers], dtype=complex)
    if sensing is not None:
        g = sensing[:, idx]
    else:
        g = _green_block(scene.transducer_positions, scene.grid_points[idx], scene.wavenumber)
    return (g * alpha) @ g.T


def random_scatterers(
    scene: SceneConfig,
    count: int,
    rng: np.random.Generator,
    min_separation: float = 3.0,
    magnitude: tuple[float, float] = (0.5, 1.5),
    max_tries: int = 10000,
) -> SceneConfig:
    """Place ``count`` scatterers uniformly on the grid with a minimum separation.

    Magnitudes are uniform on ``magnitude`` and phases uniform on [0, 2 pi).
    """
    nx, ny = scene.grid
    hx, hy = scene.grid_step
    chosen: list[tuple[int, int]] = []
    tries = 0
    while len(chosen) < count:
        tries += 1
        if tries > max_tries:
            raise RuntimeError(f"could not place {count} scatterers with separation {min_separation}")
        k = int(rng.integers(nx * ny))
        ix, iy = k % nx, k // nx
        if all(np.hypot((ix - a) * hx, (iy - b) * hy) >= min_separation for a, b in chosen):
            chosen.append((ix, iy))
    mags = rng.uniform(*magnitude, size=count)
    phases = rng.uniform(0.0, 2 * np.pi, size=count)
    return scene.with_scatterers(
        Scatterer(ix, iy, complex(m * np.exp(1j * p))) for (ix, iy), m, p in zip(chosen, mags, phases)
    )


def scene_to_dict(scene: SceneConfig) -> dict:
    return {
        "num_transducers": scene.num_transducers,
        "spacing": scene.spacing,
        "distance": scene.distance,
        "window": list(scene.window),
        "grid": list(scene.grid),
        "scatterers": [
            {"ix": s.ix, "iy": s.iy, "re": s.reflectivity.real, "im": s.reflectivity.imag}
            for s in scene.scatterers
        ],
    }


def scene_from_dict(data: dict) -> SceneConfig:
    scatterers = tuple(
        Scatterer(int(s["ix"]), int(s["iy"]), complex(float(s.get("re", 0.0)), float(s.get("im", 0.0))))
        for s in data.get("scatterers", [])
    )
    defaults = SceneConfig()
    return SceneConfig(
        num_transducers=int(data.get("num_transducers", defaults.num_transducers)),
        spacing=float(data.get("spacing", defaults.spacing)),
        distance=float(data.get("distance", defaults.distance)),
        window=tuple(float(v) for v in data.get("window", defaults.window)),
        grid=tuple(int(v) for v in data.get("grid", defaults.grid)),
        scatterers=scatterers,
    )


def load_scene(path) -> SceneConfig:
    return scene_from_dict(json.loads(Path(path).read_text()))


def save_scene(scene: SceneConfig, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n")
