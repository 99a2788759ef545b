"""Synthetic regression scenarios: linear and two Friedman-type test functions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset
from .errors import DimensionMismatch

KINDS = ("linear", "nonlinear1", "nonlinear2")
NONLINEAR_P = 10
DEFAULT_LINEAR_COEF = 0.5


@dataclass(frozen=True)
class ScenarioSpec:
    """Scenario parameters.

    For ``linear`` the default coefficients are all 0.5; with p = 10 and
    ``noise_sd=1`` the signal variance is 2.5 and the population R^2 is 5/7.
    """

    kind: str = "linear"
    n: int = 100
    p: int = 10
    beta: Optional[tuple] = None
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")
        if self.kind == "linear":
            if self.p < 1:
                raise ValueError("p must be >= 1")
            beta = self.beta
            if beta is None:
                beta = (DEFAULT_LINEAR_COEF,) * self.p
            beta = tuple(float(b) for b in beta)
            if len(beta) != self.p:
                raise DimensionMismatch("beta length must equal p")
            object.__setattr__(self, "beta", beta)
        elif self.p != NONLINEAR_P:
            raise ValueError("nonlinear scenarios use p = 10")

    def with_seed(self, seed: int) -> "ScenarioSpec":
        return ScenarioSpec(self.kind, self.n, self.p, self.beta, self.noise_sd, seed)

    def with_n(self, n: int) -> "ScenarioSpec":
        return ScenarioSpec(self.kind, n, self.p, self.beta, self.noise_sd, self.seed)


INTRO = ScenarioSpec("linear", n=1000, p=200, beta=(0.1,) * 200, noise_sd=1.0)


def _friedman_a(X):
    return (0.1 * np.exp(4 * X[:, 0]) + 4.0 / (1.0 + np.exp(-20.0 * (X[:, 1] - 0.5)))
            + 3 * X[:, 2] + 2 * X[:, 3] + X[:, 4])


def _friedman_b(X):
    return (10 * np.sin(np.pi * X[:, 0] * X[:, 1]) + 20 * (X[:, 2] - 0.5) ** 2
            + 10 * X[:, 3] + 5 * X[:, 4])


def signal_matrix(kind: str, X, beta=None) -> np.ndarray:
    """Noiseless signal f(x) for every row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if kind == "linear":
        if beta is None:
            raise ValueError("linear signal needs beta")
        beta = np.asarray(beta, dtype=float)
        if X.shape[1] != beta.size:
            raise DimensionMismatch(f"x has {X.shape[1]} entries, beta has {beta.size}")
        return X @ beta
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    if X.shape[1] < 5:
        raise DimensionMismatch("nonlinear signals need at least 5 inputs")
    return _friedman_a(X) if kind == "nonlinear1" else _friedman_b(X)


def signal(kind: str, x, beta=None) -> float:
    return float(signal_matrix(kind, np.asarray(x, dtype=float).reshape(1, -1), beta)[0])


def generate(spec: ScenarioSpec) -> Dataset:
    """Draw a dataset; an identical ScenarioSpec (seed included) gives identical bits."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "linear":
        X = rng.standard_normal((spec.n, spec.p))
        f = X @ np.asarray(spec.beta)
    else:
        X = rng.uniform(0.0, 1.0, (spec.n, NONLINEAR_P))
        f = signal_matrix(spec.kind, X)
    y = f + spec.noise_sd * rng.standard_normal(spec.n)
    return Dataset(X, y)
