import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phaseless.forward_model import SceneConfig, Scatterer, random_scatterers, response_matrix
from phaseless.polarization import (
    MissingMeasurementError,
    TimeReversalMatrix,
    hermitian_symmetrize,
    make_plan,
    measure_plan,
    read_matrix_csv,
    read_measurements_csv,
    recover_time_reversal,
    write_matrix_csv,
    write_measurements_csv,
    write_plan_manifest,
)


def rel(A, B):
    return np.linalg.norm(A - B) / np.linalg.norm(B)


def test_full_plan_n2():
    plan = make_plan("full", 2)
    assert len(plan) == 4
    assert plan.tags == ["e0", "e1", "e0+e1", "e0-ie1"]
    F = plan.matrix()
    assert np.array_equal(F[:, 3], [1, -1j])


def test_plan_sizes():
    assert len(make_plan("full", 100)) == 100 ** 2
    half = make_plan("random-pairs", 100, fraction=0.5, seed=3)
    assert len(half) == 100 + 2 * round(0.5 * 4950)
    assert len(half) == pytest.approx(100 ** 2 / 2, rel=0.02)
    edge = make_plan("edges", 100, n_edge=4)
    assert list(edge.active) == [0, 1, 2, 3, 96, 97, 98, 99]
    assert len(edge) == 64
    with pytest.raises(ValueError):
        make_plan("edges", 10, n_edge=6)
    with pytest.raises(ValueError):
        make_plan("random-pairs", 10, fraction=0.0)
    with pytest.raises(ValueError):
        make_plan("nope", 10)


def test_recovery_exact_against_product_oracle():
    scene = random_scatterers(SceneConfig(num_transducers=30), 4, np.random.default_rng(2))
    P = response_matrix(scene)
    plan = make_plan("full", 30)
    tr = recover_time_reversal(measure_plan(P, plan), plan)
    assert tr.is_complete
    assert rel(tr.M, P.conj().T @ P) <= 1e-12


def test_recovery_trivial_cases():
    P = np.array([[0.2 + 0.7j]])
    plan = make_plan("full", 1)
    tr = recover_time_reversal(measure_plan(P, plan), plan)
    assert tr.M[0, 0] == pytest.approx(abs(P[0, 0]) ** 2)
    Z = response_matrix(SceneConfig(num_transducers=6, scatterers=(Scatterer(2, 2, 0.0),)))
    plan = make_plan("full", 6)
    assert np.array_equal(recover_time_reversal(measure_plan(Z, plan), plan).M, np.zeros((6, 6)))


def test_recovery_from_tag_mapping_and_missing():
    rng = np.random.default_rng(0)
    P = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    plan = make_plan("full", 4)
    powers = measure_plan(P, plan)
    by_tag = dict(zip(plan.tags, powers))
    assert np.array_equal(recover_time_reversal(by_tag, plan).M, recover_time_reversal(powers, plan).M)
    del by_tag["e1+e3"]
    with pytest.raises(MissingMeasurementError):
        recover_time_reversal(by_tag, plan)
    with pytest.raises(MissingMeasurementError):
        recover_time_reversal(powers[:-1], plan)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(0.01, 100.0))
def test_recovery_linear_in_powers(seed, c):
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((7, 7)) + 1j * rng.standard_normal((7, 7))
    plan = make_plan("full", 7)
    p = measure_plan(P, plan)
    A = recover_time_reversal(c * p, plan).M
    B = recover_time_reversal(p, plan).M
    assert np.allclose(A, c * B, rtol=1e-12, atol=1e-12 * abs(B).max() * c)


def test_edge_plan_corner_blocks():
    scene = random_scatterers(SceneConfig(num_transducers=20), 3, np.random.default_rng(1))
    P = response_matrix(scene)
    plan = make_plan("edges", 20, n_edge=3)
    tr = recover_time_reversal(measure_plan(P, plan), plan)
    a = np.array([0, 1, 2, 17, 18, 19])
    expected = np.zeros((20, 20), bool)
    expected[np.ix_(a, a)] = True
    assert np.array_equal(tr.known, expected)
    M = P.conj().T @ P
    assert rel(tr.submatrix(), M[np.ix_(a, a)]) <= 1e-12


def test_random_pairs_mask_has_diagonal():
    plan = make_plan("random-pairs", 15, fraction=0.4, seed=5)
    P = np.eye(15, dtype=complex)
    tr = recover_time_reversal(measure_plan(P, plan), plan)
    assert tr.known.diagonal().all()
    assert np.array_equal(tr.known, tr.known.T)
    assert tr.known.sum() == 15 + 2 * len(plan.pairs)


def test_hermitian_symmetrize():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    H = A @ A.conj().T
    tr = TimeReversalMatrix(H, np.ones((5, 5), bool), np.arange(5))
    assert np.allclose(hermitian_symmetrize(tr).M, H, atol=1e-15)
    bad = H + np.diag(1j * np.full(5, 0.3))
    out = hermitian_symmetrize(TimeReversalMatrix(bad, np.ones((5, 5), bool), np.arange(5))).M
    assert np.all(out.diagonal().imag == 0)


def test_noisy_symmetrize_close_to_raw():
    scene = random_scatterers(SceneConfig(num_transducers=20), 3, np.random.default_rng(8))
    P = response_matrix(scene)
    plan = make_plan("full", 20)
    raw = recover_time_reversal(measure_plan(P, plan, 0.1, 3), plan)
    sym = hermitian_symmetrize(raw)
    assert np.allclose(sym.M, sym.M.conj().T, atol=0)
    clean = P.conj().T @ P
    assert np.linalg.norm(sym.M - raw.M) <= np.linalg.norm(raw.M - clean)


def test_csv_round_trips(tmp_path):
    scene = random_scatterers(SceneConfig(num_transducers=8), 2, np.random.default_rng(0))
    P = response_matrix(scene)
    plan = make_plan("edges", 8, n_edge=2)
    powers = write_measurements_csv(P, plan, tmp_path / "m.csv", 0.05, 11)
    assert np.array_equal(read_measurements_csv(tmp_path / "m.csv", len(plan)), powers)
    tr = recover_time_reversal(powers, plan)
    write_matrix_csv(tr, tmp_path / "M.csv")
    back = read_matrix_csv(tmp_path / "M.csv")
    assert np.array_equal(back.M, tr.M) and np.array_equal(back.known, tr.known)
    assert list(back.active) == list(tr.active)
    write_plan_manifest(plan, tmp_path / "plan.csv")
    assert "e0-ie1" in (tmp_path / "plan.csv").read_text()
