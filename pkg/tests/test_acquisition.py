import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phaseless.acquisition import (
    IntensityVector,
    add_intensity_noise,
    illumination_basis,
    intensities,
    power_from_intensities,
    rng_from_seed,
    total_power,
)


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_basis_vectors():
    # indices are zero-based: transducer 3 of 5 is index 2
    assert np.array_equal(illumination_basis("single", 2, n=5).f, [0, 0, 1, 0, 0])
    assert np.array_equal(illumination_basis("pair-sum", 0, 1, n=4).f, [1, 1, 0, 0])
    assert np.array_equal(illumination_basis("pair-quadrature", 0, 1, n=4).f, [1, -1j, 0, 0])
    assert illumination_basis("pair-quadrature", 0, 1, n=4).tag == "e0-ie1"


def test_basis_errors():
    with pytest.raises(IndexError):
        illumination_basis("single", 5, n=5)
    with pytest.raises(ValueError):
        illumination_basis("pair-sum", 1, 1, n=4)
    with pytest.raises(ValueError):
        illumination_basis("bogus", 1, 2, n=4)


def test_intensities_trivial(rng):
    P = random_complex(rng, 6, 6)
    assert np.array_equal(intensities(P, np.zeros(6)).values, np.zeros(6))
    p = 0.3 - 0.4j
    assert intensities(np.array([[p]]), np.array([1.0])).values[0] == pytest.approx(0.25)
    with pytest.raises(ValueError):
        intensities(P, np.ones(5))


def test_intensities_and_power_oracle(rng):
    P = random_complex(rng, 12, 12)
    f = random_complex(rng, 12)
    ref = np.array([abs(sum(P[r, s] * f[s] for s in range(12))) ** 2 for r in range(12)])
    assert np.allclose(intensities(P, f).values, ref, rtol=1e-12, atol=0)
    assert total_power(P, f) == pytest.approx(np.linalg.norm(P @ f) ** 2, rel=1e-12)
    e = np.zeros(12)
    e[4] = 1
    assert total_power(P, e) == pytest.approx(np.sum(np.abs(P[:, 4]) ** 2), rel=1e-13)
    assert total_power(P, np.zeros(12)) == 0.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 20))
def test_total_power_is_sum_of_intensities(seed, n):
    rng = np.random.default_rng(seed)
    P, f = random_complex(rng, n, n), random_complex(rng, n)
    b = intensities(P, f).values
    assert total_power(P, f) == power_from_intensities(b)
    assert power_from_intensities(b) >= 0


def test_noise_zero_is_identity():
    b = IntensityVector(np.array([1.0, 2.0, 3.0]))
    out = add_intensity_noise(b, 0.0, 1)
    assert np.array_equal(out.values, b.values)
    with pytest.raises(ValueError):
        add_intensity_noise(b, 1.0, 1)
    with pytest.raises(ValueError):
        add_intensity_noise(b, -0.1, 1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), eps=st.floats(0.0, 0.99))
def test_noise_interval(seed, eps):
    b = np.random.default_rng(seed).uniform(0, 5, 50)
    out = add_intensity_noise(b, eps, seed).values
    assert np.all(out >= (1 - eps) * b - 1e-15) and np.all(out <= (1 + eps) * b + 1e-15)


def test_noise_deterministic_in_seed():
    b = np.linspace(1, 2, 30)
    a1 = add_intensity_noise(b, 0.2, 99).values
    a2 = add_intensity_noise(b, 0.2, 99).values
    a3 = add_intensity_noise(b, 0.2, 100).values
    assert np.array_equal(a1, a2) and not np.array_equal(a1, a3)
    assert isinstance(rng_from_seed(3).bit_generator, np.random.Philox)


def test_noise_moments():
    eps, b = 0.1, 2.5
    draws = add_intensity_noise(np.full(100_000, b), eps, 7).values
    assert draws.var() == pytest.approx(eps ** 2 * b ** 2 / 3, rel=0.05)
    assert draws.mean() == pytest.approx(b, rel=0.01)
    # mean over std of a single noisy entry
    assert draws.mean() / draws.std() == pytest.approx(np.sqrt(3) / eps, rel=0.05)
