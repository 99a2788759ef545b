"""Bias diagnostics for regression predictions.

Prediction error is taken as ``y_hat - y`` throughout, so a positive tail
bias means overestimation and center-warped (mean-ward) predictions give a
positive bias slope and a negative residual correlation.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateVariance, DimensionMismatch, EmptyTail, NonFiniteInput

METRIC_NAMES = ("bias_slope", "residual_correlation", "rmse", "bias_below_q1",
                "bias_above_q3")


@dataclass(frozen=True)
class EvaluationReport:
    bias_slope: float
    residual_correlation: float
    rmse: float
    bias_below_q1: float
    bias_above_q3: float
    n: int
    split_label: str

    def as_dict(self) -> dict:
        return asdict(self)

    def metrics(self) -> dict:
        return {k: getattr(self, k) for k in METRIC_NAMES}


def _pair(y, y_hat, min_len):
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.shape != y_hat.shape:
        raise DimensionMismatch(f"y has {y.size} entries, y_hat has {y_hat.size}")
    if y.size < min_len:
        raise DimensionMismatch(f"need at least {min_len} observations, got {y.size}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(y_hat))):
        raise NonFiniteInput("metric input contains NaN or Inf")
    return y, y_hat


def _centered_ss(v):
    d = v - v.mean()
    return d, float(d @ d)


def bias_slope(y, y_hat) -> float:
    """1 minus the OLS slope of y_hat regressed on y (with intercept)."""
    y, y_hat = _pair(y, y_hat, 3)
    dy, ssy = _centered_ss(y)
    if ssy <= 0:
        raise DegenerateVariance("observed responses have zero variance")
    return float(1.0 - (dy @ (y_hat - y_hat.mean())) / ssy)


def residual_correlation(y, y_hat) -> float:
    """Pearson correlation between the observed y and the error y_hat - y."""
    y, y_hat = _pair(y, y_hat, 3)
    dy, ssy = _centered_ss(y)
    de, sse = _centered_ss(y_hat - y)
    _, ssh = _centered_ss(y_hat)
    scale = max(ssy, ssh, np.finfo(float).tiny)
    if ssy <= 0 or sse <= 1e-28 * scale:
        raise DegenerateVariance("responses or errors have zero variance")
    return float(np.clip((dy @ de) / np.sqrt(ssy * sse), -1.0, 1.0))


def rmse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat, 1)
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def quartiles(y):
    """Lower and upper quartiles by linear interpolation of order statistics."""
    return tuple(np.quantile(np.asarray(y, dtype=float), [0.25, 0.75], method="linear"))


def tail_bias(y, y_hat, tail: str) -> float:
    """Mean of y_hat - y over observations below Q1 or above Q3 of y."""
    y, y_hat = _pair(y, y_hat, 8)
    q1, q3 = quartiles(y)
    if tail == "below_q1":
        mask = y < q1
    elif tail == "above_q3":
        mask = y > q3
    else:
        raise ValueError(f"unknown tail {tail!r}")
    if not mask.any():
        raise EmptyTail(f"no observations in tail {tail}")
    return float(np.mean(y_hat[mask] - y[mask]))


def evaluate(y, y_hat, split_label: str = "test") -> EvaluationReport:
    if split_label not in ("train", "test"):
        raise ValueError("split_label must be 'train' or 'test'")
    y, y_hat = _pair(y, y_hat, 8)
    return EvaluationReport(
        bias_slope=bias_slope(y, y_hat),
        residual_correlation=residual_correlation(y, y_hat),
        rmse=rmse(y, y_hat),
        bias_below_q1=tail_bias(y, y_hat, "below_q1"),
        bias_above_q3=tail_bias(y, y_hat, "above_q3"),
        n=int(y.size),
        split_label=split_label,
    )
