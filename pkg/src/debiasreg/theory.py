"""Closed forms and a Monte-Carlo check of the mean-ward shrinkage trade-off.

For an unbiased prediction with coefficient of determination R^2 of an
outcome with variance sigma^2, shrinking the prediction toward the mean by a
factor (1 - c) lowers the expected sum of squared errors whenever
c < (1 - R^2) / (1 - R^2 / 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BiasTrend:
    c: float
    r_squared: float
    sigma2: float = 1.0
    n: int = 100

    def __post_init__(self):
        if not 0 < self.c < 1:
            raise ValueError("c must lie in (0, 1)")
        if not 0 <= self.r_squared < 1:
            raise ValueError("r_squared must lie in [0, 1)")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if self.n < 2:
            raise ValueError("n must be >= 2")


def expected_mse_unbiased(t: BiasTrend) -> float:
    return (t.n - 1) * t.sigma2 * (1 - t.r_squared)


def expected_mse_biased(t: BiasTrend) -> float:
    return (t.n - 1) * (t.c**2 * t.sigma2 + (1 - t.c) ** 2 * t.sigma2 * (1 - t.r_squared))


def critical_c(r_squared: float) -> float:
    if not 0 <= r_squared < 1:
        raise ValueError("r_squared must lie in [0, 1)")
    return (1 - r_squared) / (1 - r_squared / 2)


@dataclass(frozen=True)
class Prop1Result:
    mean_mse_unbiased: float
    mean_mse_biased: float
    se_unbiased: float
    se_biased: float
    expected_unbiased: float
    expected_biased: float
    inequality_holds: bool
    reps: int

    @property
    def z_unbiased(self) -> float:
        return (self.mean_mse_unbiased - self.expected_unbiased) / self.se_unbiased

    @property
    def z_biased(self) -> float:
        return (self.mean_mse_biased - self.expected_biased) / self.se_biased


def simulate_sums_of_squares(t: BiasTrend, reps: int, seed: int = 0):
    """Per-replication squared-error sums of the unbiased and shrunk predictions.

    Each replication draws y ~ N(0, sigma^2) and an unbiased prediction
    y_hat = y + u with independent u ~ N(0, (1 - R^2) sigma^2), so that
    E[y_hat | y] = y and the error variance is the (1 - R^2) share of
    var(y). The shrunk prediction is (1 - c) y_hat. Sums are taken about the
    sample means, which gives them n - 1 degrees of freedom.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    rng = np.random.default_rng(seed)
    sd = np.sqrt(t.sigma2)
    y = sd * rng.standard_normal((reps, t.n))
    y_hat = y + sd * np.sqrt(1 - t.r_squared) * rng.standard_normal((reps, t.n))
    y_c = y - y.mean(axis=1, keepdims=True)
    h_c = y_hat - y_hat.mean(axis=1, keepdims=True)
    ss_unbiased = np.sum((y_c - h_c) ** 2, axis=1)
    ss_biased = np.sum((y_c - (1 - t.c) * h_c) ** 2, axis=1)
    return ss_unbiased, ss_biased


def monte_carlo_prop1(t: BiasTrend, reps: int = 2000, seed: int = 0) -> Prop1Result:
    ss_u, ss_b = simulate_sums_of_squares(t, reps, seed)
    se = lambda v: float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("inf")
    mu, mb = float(ss_u.mean()), float(ss_b.mean())
    return Prop1Result(
        mean_mse_unbiased=mu,
        mean_mse_biased=mb,
        se_unbiased=se(ss_u),
        se_biased=se(ss_b),
        expected_unbiased=expected_mse_unbiased(t),
        expected_biased=expected_mse_biased(t),
        inequality_holds=mu >= mb,
        reps=reps,
    )
