import numpy as np
import pytest

from debiasreg import (
    BiasTrend, critical_c, expected_mse_biased, expected_mse_unbiased, monte_carlo_prop1,
)

GRID_C = np.round(np.arange(0.05, 0.951, 0.05), 10)
GRID_R2 = np.round(np.arange(0.0, 0.91, 0.1), 10)


def test_expected_unbiased_examples():
    assert expected_mse_unbiased(BiasTrend(0.5, 0.0, 1.0, 2)) == 1.0
    assert expected_mse_unbiased(BiasTrend(0.5, 0.5, 4.0, 101)) == 200.0
    assert expected_mse_unbiased(BiasTrend(0.5, 1 - 1e-12, 1.0, 10)) == pytest.approx(0, abs=1e-9)


def test_expected_biased_examples():
    assert expected_mse_biased(BiasTrend(0.5, 0.0, 1.0, 2)) == 0.5
    t = BiasTrend(1e-9, 0.3, 2.0, 50)
    assert expected_mse_biased(t) == pytest.approx(expected_mse_unbiased(t), rel=1e-8)
    t = BiasTrend(1 - 1e-12, 0.3, 2.0, 50)
    assert expected_mse_biased(t) == pytest.approx(49 * 2.0, rel=1e-9)


def test_critical_c_examples():
    assert critical_c(0.0) == 1.0
    assert critical_c(0.5) == pytest.approx(2 / 3, abs=1e-15)
    assert critical_c(1 - 1e-12) == pytest.approx(0.0, abs=1e-11)
    with pytest.raises(ValueError):
        critical_c(1.0)


def test_threshold_forms_agree():
    for r2 in GRID_R2:
        assert critical_c(r2) == pytest.approx((2 - 2 * r2) / (2 - r2), abs=1e-14)


def test_threshold_consistency_on_grid():
    for c in GRID_C:
        for r2 in GRID_R2:
            t = BiasTrend(float(c), float(r2), 1.0, 30)
            if np.isclose(c, critical_c(r2)):
                continue
            better = expected_mse_biased(t) < expected_mse_unbiased(t)
            assert better == (c < critical_c(r2))


@pytest.mark.parametrize("kwargs", [dict(c=0.0, r_squared=0.5), dict(c=1.0, r_squared=0.5),
                                    dict(c=0.5, r_squared=1.0), dict(c=0.5, r_squared=-0.1),
                                    dict(c=0.5, r_squared=0.5, sigma2=0.0),
                                    dict(c=0.5, r_squared=0.5, n=1)])
def test_bias_trend_validation(kwargs):
    with pytest.raises(ValueError):
        BiasTrend(**kwargs)


def test_monte_carlo_below_threshold():
    res = monte_carlo_prop1(BiasTrend(0.4, 0.5, 1.0, 200), reps=2000, seed=0)
    assert res.inequality_holds
    assert abs(res.z_unbiased) <= 4 and abs(res.z_biased) <= 4
    assert res.expected_unbiased == pytest.approx(99.5)
    assert res.expected_biased == pytest.approx(67.66)


def test_monte_carlo_above_threshold():
    res = monte_carlo_prop1(BiasTrend(0.9, 0.5, 1.0, 200), reps=2000, seed=0)
    assert not res.inequality_holds
    assert abs(res.z_unbiased) <= 4 and abs(res.z_biased) <= 4


@pytest.mark.parametrize("seed", range(5))
def test_monte_carlo_matches_closed_forms(seed):
    t = BiasTrend(0.25, 0.8, 3.0, 40)
    res = monte_carlo_prop1(t, reps=1000, seed=seed)
    assert abs(res.z_unbiased) <= 4 and abs(res.z_biased) <= 4


def test_monte_carlo_error_shrinks_with_reps():
    t = BiasTrend(0.4, 0.5, 1.0, 50)
    errs = []
    for reps in (250, 1000, 4000):
        runs = [monte_carlo_prop1(t, reps, seed) for seed in range(20)]
        errs.append(np.mean([abs(r.mean_mse_unbiased - r.expected_unbiased) for r in runs]))
    assert errs[1] <= errs[0] and errs[2] <= errs[1]


def test_monte_carlo_deterministic():
    t = BiasTrend(0.4, 0.5)
    assert monte_carlo_prop1(t, 50, 3) == monte_carlo_prop1(t, 50, 3)
    with pytest.raises(ValueError):
        monte_carlo_prop1(t, 0)
