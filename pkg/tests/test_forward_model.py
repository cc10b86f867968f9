import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phaseless.forward_model import (
    SceneConfig,
    Scatterer,
    SingularEvaluationError,
    green,
    green_vector,
    load_scene,
    random_scatterers,
    reflectivity_vector,
    response_matrix,
    save_scene,
    scene_from_dict,
    scene_to_dict,
    sensing_matrix,
)

from conftest import small_scene


def test_green_unit_distance():
    assert green([0, 0], [1, 0]) == pytest.approx(1 / (4 * np.pi), abs=1e-15)
    assert green([0, 0], [1, 0]) == pytest.approx(0.0795775, abs=1e-7)


def test_green_half_wavelength():
    assert green([0, 0], [0, 0.5]) == pytest.approx(-1 / (2 * np.pi), abs=1e-15)
    assert green([0, 0], [0, 0.5]) == pytest.approx(-0.1591549, abs=1e-7)


def test_green_coincident_raises():
    with pytest.raises(SingularEvaluationError):
        green([1.0, 2.0], [1.0, 2.0])


def test_green_vector_single_transducer():
    scene = SceneConfig(num_transducers=1, grid=(3, 3), window=(3.0, 3.0), distance=10.0)
    y = scene.grid_points[4]
    g = green_vector(y, scene)
    assert g.shape == (1,)
    assert g[0] == pytest.approx(green(scene.transducer_positions[0], y))


def test_green_vector_norm_oracle():
    scene = SceneConfig(num_transducers=7, spacing=1.3)
    y = np.array([2.4, 95.0])
    r = [np.hypot(x[0] - y[0], x[1] - y[1]) for x in scene.transducer_positions]
    expected = sum(1 / (4 * np.pi * ri) ** 2 for ri in r)
    assert np.linalg.norm(green_vector(y, scene)) ** 2 == pytest.approx(expected, rel=1e-13)


def test_green_vector_palindromic_on_bisector():
    scene = SceneConfig(num_transducers=9)
    g = green_vector([0.0, 50.0], scene)
    assert np.allclose(g, g[::-1], rtol=0, atol=1e-15)


def test_green_vector_on_transducer_raises():
    scene = SceneConfig(num_transducers=3)
    with pytest.raises(SingularEvaluationError):
        green_vector(scene.transducer_positions[1], scene)


def test_sensing_matrix_columns():
    scene = SceneConfig(num_transducers=4, grid=(1, 1), window=(1.0, 1.0))
    G = sensing_matrix(scene)
    assert G.shape == (4, 1)
    assert np.allclose(G[:, 0], green_vector(scene.grid_points[0], scene))

    big = SceneConfig()
    G = sensing_matrix(big)
    assert G.shape == (100, 900)
    for k in (0, 17, 450, 899):
        assert np.array_equal(G[:, k], green_vector(big.grid_points[k], big))
    # distinct pixels give distinct columns
    assert np.all(np.abs(G[:, :-1] - G[:, 1:]).max(axis=0) > 0)


def test_grid_layout():
    scene = SceneConfig()
    pts = scene.grid_points
    assert scene.num_pixels == 900
    assert scene.grid_step == (1.0, 1.0)
    # k = iy * nx + ix: x varies fastest
    assert pts[1, 0] - pts[0, 0] == pytest.approx(1.0)
    assert pts[30, 1] - pts[0, 1] == pytest.approx(1.0)
    assert pts[:, 1].mean() == pytest.approx(100.0)
    assert scene.pixel_coords(scene.pixel_index(7, 11)) == (7, 11)
    x = scene.transducer_positions[:, 0]
    assert np.allclose(np.diff(x), 1.0) and x.mean() == pytest.approx(0.0)


def test_scene_validation():
    with pytest.raises(ValueError):
        SceneConfig(grid=(3, 3), scatterers=(Scatterer(3, 0, 1.0),))
    with pytest.raises(ValueError):
        SceneConfig(scatterers=(Scatterer(1, 1, 1.0), Scatterer(1, 1, 2.0)))
    with pytest.raises(ValueError):
        SceneConfig(num_transducers=0)
    with pytest.raises(ValueError):
        SceneConfig(spacing=0.0)


def test_reflectivity_vector_support():
    scene = small_scene(count=4)
    rho = reflectivity_vector(scene)
    assert np.count_nonzero(rho) == 4
    assert sorted(np.flatnonzero(rho)) == scene.support


def test_response_zero_reflectivity():
    scene = SceneConfig(num_transducers=5, scatterers=(Scatterer(3, 3, 0.0),))
    assert np.array_equal(response_matrix(scene), np.zeros((5, 5)))
    assert np.array_equal(response_matrix(SceneConfig(num_transducers=5)), np.zeros((5, 5)))


def test_response_single_scatterer_rank_one():
    scene = SceneConfig(num_transducers=12, scatterers=(Scatterer(4, 9, 0.7 - 0.2j),))
    g = green_vector(scene.grid_points[scene.pixel_index(4, 9)], scene)
    P = response_matrix(scene)
    assert np.allclose(P, (0.7 - 0.2j) * np.outer(g, g), rtol=0, atol=1e-16)
    s = np.linalg.svd(P, compute_uv=False)
    assert np.count_nonzero(s > 1e-10 * s[0]) == 1


def test_response_matches_double_loop_oracle():
    scene = SceneConfig(num_transducers=5, grid=(6, 6), window=(6.0, 6.0), distance=20.0)
    scene = random_scatterers(scene, 3, np.random.default_rng(3), min_separation=1.0)
    xs, ys = scene.transducer_positions, scene.grid_points
    P_ref = np.zeros((5, 5), dtype=complex)
    for r in range(5):
        for s in range(5):
            for sc in scene.scatterers:
                y = ys[scene.pixel_index(sc.ix, sc.iy)]
                P_ref[r, s] += sc.reflectivity * green(xs[r], y) * green(y, xs[s])
    P = response_matrix(scene)
    assert np.linalg.norm(P - P_ref) <= 1e-12 * np.linalg.norm(P_ref)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), count=st.integers(1, 6))
def test_response_properties(seed, count):
    scene = random_scatterers(SceneConfig(num_transducers=40), count, np.random.default_rng(seed))
    G = sensing_matrix(scene)
    P = response_matrix(scene)
    assert np.linalg.norm(P - P.T) <= 1e-14 * np.linalg.norm(P)
    # product form
    P2 = G @ np.diag(reflectivity_vector(scene)) @ G.T
    assert np.linalg.norm(P - P2) <= 1e-12 * np.linalg.norm(P)
    # rank equals the number of scatterers
    s = np.linalg.svd(P, compute_uv=False)
    assert np.count_nonzero(s > 1e-10 * s[0]) == count


def test_random_scatterers_rules():
    scene = random_scatterers(SceneConfig(), 9, np.random.default_rng(5))
    pts = [(s.ix, s.iy) for s in scene.scatterers]
    for i, a in enumerate(pts):
        for b in pts[i + 1:]:
            assert np.hypot(a[0] - b[0], a[1] - b[1]) >= 3.0
    mags = [abs(s.reflectivity) for s in scene.scatterers]
    assert min(mags) >= 0.5 and max(mags) <= 1.5
    with pytest.raises(RuntimeError):
        random_scatterers(SceneConfig(grid=(3, 3), window=(3.0, 3.0)), 5, np.random.default_rng(0), max_tries=200)


def test_scene_json_round_trip(tmp_path):
    scene = small_scene(count=3)
    path = tmp_path / "scene.json"
    save_scene(scene, path)
    data = json.loads(path.read_text())
    assert set(data) == {"num_transducers", "spacing", "distance", "window", "grid", "scatterers"}
    assert set(data["scatterers"][0]) == {"ix", "iy", "re", "im"}
    assert load_scene(path) == scene
    assert scene_from_dict(scene_to_dict(scene)) == scene
