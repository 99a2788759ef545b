import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from debiasreg import (
    DegenerateVariance, DimensionMismatch, EmptyTail, bias_slope, evaluate, quartiles,
    residual_correlation, rmse, tail_bias,
)

Y8 = np.arange(1.0, 9.0)


def test_bias_slope_examples():
    assert bias_slope([1, 2, 3], [1, 2, 3]) == 0.0
    assert bias_slope([1, 2, 3], [2, 2, 2]) == 1.0
    assert bias_slope([0, 1, 2, 3], [0.5, 1.0, 1.5, 2.0]) == pytest.approx(0.5, abs=1e-15)


def test_bias_slope_degenerate():
    with pytest.raises(DegenerateVariance):
        bias_slope([1, 1, 1], [1, 2, 3])


def test_residual_correlation_zero_error_is_degenerate():
    with pytest.raises(DegenerateVariance):
        residual_correlation([1, 2, 3], [1, 2, 3])


def test_residual_correlation_under_proportional_shrinkage():
    # error y_hat - y = -0.5 y runs opposite to y
    assert residual_correlation([-1, 0, 1], [-0.5, 0, 0.5]) == pytest.approx(-1.0)


def test_residual_correlation_under_expansion():
    assert residual_correlation([-1, 0, 1], [-2, 0, 2]) == pytest.approx(1.0)


def test_residual_correlation_of_ols_fit(rng):
    # regressing y on features: the error is y_hat - y = -(OLS residual), which
    # is uncorrelated with y_hat, so corr(y, error) = -sqrt(1 - R^2)
    X = np.column_stack([np.ones(40), rng.normal(size=(40, 3))])
    y = X @ [1, 2, -1, 0.5] + rng.normal(size=40)
    y_hat = X @ np.linalg.lstsq(X, y, rcond=None)[0]
    r2 = 1 - np.sum((y - y_hat) ** 2) / np.sum((y - y.mean()) ** 2)
    assert residual_correlation(y, y_hat) == pytest.approx(-np.sqrt(1 - r2), abs=1e-10)
    assert np.corrcoef(y_hat, y - y_hat)[0, 1] == pytest.approx(0.0, abs=1e-10)


def test_rmse_examples():
    assert rmse([1, 2], [1, 2]) == 0.0
    assert rmse([0, 0], [1, -1]) == 1.0
    assert rmse([3], [0]) == 3.0
    with pytest.raises(DimensionMismatch):
        rmse([1, 2], [1])


def test_quartiles_interpolate():
    assert quartiles(Y8) == (2.75, 6.25)


def test_tail_bias_examples():
    assert tail_bias(Y8, Y8, "below_q1") == 0.0
    assert tail_bias(Y8, Y8, "above_q3") == 0.0
    const = np.full(8, 4.5)
    assert tail_bias(Y8, const, "below_q1") == pytest.approx(3.0)
    assert tail_bias(Y8, const, "above_q3") == pytest.approx(-3.0)
    assert tail_bias(Y8, Y8 + 0.7, "below_q1") == pytest.approx(0.7)
    assert tail_bias(Y8, Y8 + 0.7, "above_q3") == pytest.approx(0.7)


def test_tail_bias_requires_eight_points_and_nonempty_tail():
    with pytest.raises(DimensionMismatch):
        tail_bias(Y8[:7], Y8[:7], "below_q1")
    with pytest.raises(EmptyTail):
        tail_bias(np.ones(8), np.ones(8), "below_q1")
    with pytest.raises(ValueError):
        tail_bias(Y8, Y8, "middle")


def test_evaluate_near_identity(rng):
    y_hat = Y8 + 1e-12 * rng.normal(size=8)
    rep = evaluate(Y8, y_hat, "train")
    assert rep.bias_slope == pytest.approx(0, abs=1e-10)
    assert rep.rmse == pytest.approx(0, abs=1e-10)
    assert rep.bias_below_q1 == pytest.approx(0, abs=1e-10)
    assert rep.bias_above_q3 == pytest.approx(0, abs=1e-10)
    assert rep.split_label == "train" and rep.n == 8


def test_evaluate_affine_shrinkage():
    c = 0.3
    y_hat = Y8.mean() + (1 - c) * (Y8 - Y8.mean())
    rep = evaluate(Y8, y_hat)
    assert rep.bias_slope == pytest.approx(0.3, abs=1e-14)
    assert rep.residual_correlation == pytest.approx(-1.0, abs=1e-14)
    assert rep.bias_below_q1 > 0 > rep.bias_above_q3


@given(arrays(float, st.integers(8, 50), elements=st.floats(-100, 100)),
       st.floats(0.01, 0.99))
def test_affine_shrinkage_identity(y, c):
    if np.ptp(y) < 1e-3:
        return
    y_hat = y.mean() + (1 - c) * (y - y.mean())
    assert bias_slope(y, y_hat) == pytest.approx(c, abs=1e-9)
    assert residual_correlation(y, y_hat) == pytest.approx(-1.0, abs=1e-9)


@given(arrays(float, 20, elements=st.floats(-10, 10)),
       arrays(float, 20, elements=st.floats(-10, 10)), st.floats(-1e3, 1e3))
def test_shift_invariance(y, noise, shift):
    y_hat = 0.6 * y + noise
    if np.ptp(y) < 1e-3 or np.ptp(y_hat - y) < 1e-3 or np.ptp(y_hat) < 1e-3:
        return
    assert bias_slope(y + shift, y_hat + shift) == pytest.approx(
        bias_slope(y, y_hat), abs=1e-6)
    assert residual_correlation(y + shift, y_hat + shift) == pytest.approx(
        residual_correlation(y, y_hat), abs=1e-6)


@given(arrays(float, st.integers(2, 40), elements=st.floats(-50, 50)),
       arrays(float, 40, elements=st.floats(-50, 50)))
def test_rmse_decomposition(y, noise):
    y_hat = y + noise[: y.size]
    e = y - y_hat
    n = y.size
    lhs = rmse(y, y_hat) ** 2
    rhs = np.var(e, ddof=1) * (n - 1) / n + np.mean(e) ** 2
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_residual_correlation_identity_with_slope(rng):
    y = rng.normal(size=30)
    y_hat = 0.4 * y + 0.3 * rng.normal(size=30)
    lhs = residual_correlation(y, y_hat)
    rhs = -bias_slope(y, y_hat) * np.std(y) / np.std(y_hat - y)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert -1 <= lhs <= 1


def test_residual_correlation_of_constant_prediction():
    assert residual_correlation([1, 2, 4], [2, 2, 2]) == pytest.approx(-1.0)
