import numpy as np
import pytest

from phaseless.forward_model import SceneConfig, random_scatterers

ACCEPTANCE = {}


def small_scene(n=20, grid=(10, 10), count=3, seed=0, distance=30.0):
    base = SceneConfig(num_transducers=n, grid=grid, window=(float(grid[0]), float(grid[1])), distance=distance)
    return random_scatterers(base, count, np.random.default_rng(seed), min_separation=2.0)


@pytest.fixture
def scene3():
    return small_scene()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def record(criterion, ok, detail):
    ACCEPTANCE[criterion] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=str):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
