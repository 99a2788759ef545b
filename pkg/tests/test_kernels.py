import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from debiasreg import (
    DimensionMismatch, IndexOutOfRange, KernelSpec, NonFiniteInput, cross_gram, gram,
    median_bandwidth, partition_by_mean, row_slices,
)


def test_single_row_gram():
    K = gram(np.array([[3.0, -1.0]]), KernelSpec(0.7))
    np.testing.assert_array_equal(K.values, [[1 + 1e-10]])


def test_identical_rows_all_ones():
    K = gram(np.ones((2, 3)), KernelSpec(1.0, jitter=0.0))
    np.testing.assert_array_equal(K.values, np.ones((2, 2)))


def test_unit_distance_value():
    K = gram(np.array([[0.0], [1.0]]), KernelSpec(1.0, jitter=0.0))
    assert K.values[0, 1] == pytest.approx(math.exp(-1), abs=1e-15)
    assert K.values[0, 1] == pytest.approx(0.3678794, abs=1e-7)


def test_cross_gram_values():
    k = cross_gram(np.array([[2.0]]), np.array([[0.0], [1.0]]), KernelSpec(2.0))
    np.testing.assert_allclose(k, [[0.3678794, 0.7788008]], atol=1e-7)


def test_cross_gram_self_consistency(rng):
    X = rng.normal(size=(6, 3))
    spec = KernelSpec(1.3, jitter=1e-6)
    np.testing.assert_allclose(cross_gram(X, X, spec),
                               gram(X, spec).values - 1e-6 * np.eye(6), atol=1e-15)


def test_cross_gram_identical_point_is_one(rng):
    X = rng.normal(size=(5, 2))
    k = cross_gram(X[[3]], X, KernelSpec(0.9))
    assert k[0, 3] == 1.0


def test_cross_gram_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        cross_gram(np.zeros((1, 2)), np.zeros((3, 3)), KernelSpec(1.0))


def test_gram_rejects_nonfinite():
    with pytest.raises(NonFiniteInput):
        gram(np.array([[np.inf]]), KernelSpec(1.0))


@pytest.mark.parametrize("kwargs", [dict(bandwidth=0.0), dict(bandwidth=-1.0),
                                    dict(bandwidth=1.0, jitter=-1e-3)])
def test_kernel_spec_validation(kwargs):
    with pytest.raises(ValueError):
        KernelSpec(**kwargs)


def test_row_slices():
    K = gram(np.array([[0.0], [1.0]]), KernelSpec(1.0))
    below, above = row_slices(K, partition_by_mean([0.0, 1.0]))
    np.testing.assert_array_equal(below, K.values[[0]])
    np.testing.assert_array_equal(above, K.values[[1]])


def test_row_slices_keep_order(rng):
    K = gram(rng.normal(size=(3, 2)), KernelSpec(1.0))
    below, above = row_slices(K, partition_by_mean([1.0, 5.0, 2.0]))
    np.testing.assert_array_equal(below, K.values[[0, 2]])
    np.testing.assert_array_equal(above, K.values[[1]])


def test_row_slices_out_of_range(rng):
    K = gram(rng.normal(size=(2, 2)), KernelSpec(1.0))
    with pytest.raises(IndexOutOfRange):
        row_slices(K, partition_by_mean([1.0, 2.0, 3.0]))


def test_gram_psd_on_random_inputs(rng):
    for _ in range(50):
        X = rng.normal(size=(10, 3))
        K = gram(X, KernelSpec(median_bandwidth(X), jitter=0.0)).values
        np.testing.assert_allclose(K, K.T, atol=1e-12)
        assert np.linalg.eigvalsh(K).min() >= -1e-8


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2),
       st.floats(0.1, 10), st.floats(1.01, 3))
def test_kernel_range_and_bandwidth_monotonicity(pair, sigma, factor):
    X = np.array(pair).reshape(2, 1)
    k1 = gram(X, KernelSpec(sigma, jitter=0.0)).values[0, 1]
    k2 = gram(X, KernelSpec(sigma * factor, jitter=0.0)).values[0, 1]
    assert 0.0 <= k1 <= 1.0
    assert k2 >= k1
    if 1e-300 < k1 < 1.0 - 1e-9:  # strict where doubles can resolve the change
        assert k2 > k1


def test_median_bandwidth():
    X = np.array([[0.0], [1.0], [3.0]])
    assert median_bandwidth(X) == 2.0
    assert median_bandwidth(X[:1]) == 1.0
    assert median_bandwidth(np.zeros((4, 2))) == 1.0
