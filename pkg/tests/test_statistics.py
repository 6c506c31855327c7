import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from measqc.statistics import (
    THREE_SIGMA_P,
    geometric_chi_square,
    geometric_mean_check,
    histogram,
    pauli_gadget_samples,
    walk_samples,
)


def test_three_sigma_threshold():
    assert THREE_SIGMA_P == pytest.approx(0.0026998, rel=1e-4)


def test_mean_check_on_exact_geometric_samples():
    rng = np.random.default_rng(0)
    x = rng.geometric(0.25, 20_000)
    m = geometric_mean_check(x, 0.25)
    assert m.expected == 4.0 and m.ok
    assert m.model_sigma == pytest.approx(np.sqrt(0.75) / 0.25 / np.sqrt(20_000))
    scaled = geometric_mean_check(2 * x, 0.25, scale=2.0)
    assert scaled.expected == 8.0 and scaled.z == pytest.approx(m.z)


def test_mean_check_flags_a_wrong_rate():
    x = np.random.default_rng(1).geometric(0.2, 20_000)
    assert not geometric_mean_check(x, 0.25).ok


def test_chi_square_accepts_geometric_and_rejects_uniform():
    rng = np.random.default_rng(2)
    assert not geometric_chi_square(rng.geometric(1 / 16, 10_000), 1 / 16).rejected
    assert geometric_chi_square(rng.integers(1, 32, 10_000), 1 / 16).rejected


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.25, 1 / 16]))
def test_chi_square_bins_meet_minimum_expectation(seed, p):
    x = np.random.default_rng(seed).geometric(p, 2000)
    res = geometric_chi_square(x, p)
    assert res.dof >= 1
    assert 0.0 <= res.p_value <= 1.0


def test_histogram():
    assert histogram([3, 1, 3, 2]) == {1: 1, 2: 1, 3: 2}


def test_pauli_gadget_samples_are_seeded():
    a = pauli_gadget_samples(200, seed=5)
    b = pauli_gadget_samples(200, seed=5)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], 2 * a[0])


def test_walk_samples_are_seeded_and_positive():
    a = walk_samples(100, seed=6)
    np.testing.assert_array_equal(a, walk_samples(100, seed=6))
    assert a.min() >= 1
