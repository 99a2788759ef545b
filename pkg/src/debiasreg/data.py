"""Dataset container, mean partition and train/test splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import BadSize, DegeneratePartition, DimensionMismatch, NonFiniteInput


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``features`` (n x p) and response ``response`` (n,)."""

    features: np.ndarray
    response: np.ndarray
    feature_names: Optional[tuple] = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.response, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or y.ndim != 1:
            raise DimensionMismatch("features must be 2-d and response 1-d")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise BadSize(f"dataset needs n >= 1 and p >= 1, got {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(
                f"{X.shape[0]} feature rows but {y.shape[0]} responses")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise NonFiniteInput("dataset contains NaN or Inf")
        names = self.feature_names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != X.shape[1]:
                raise DimensionMismatch("feature_names length must equal p")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "response", _frozen(y))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, rows: Sequence[int]) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.features[rows], self.response[rows], self.feature_names)


@dataclass(frozen=True)
class MeanPartition:
    """Below-mean / above-mean split of a response vector.

    Indices are 0-based positions into the response. Ties with the overall
    mean are assigned to the below group so the partition is total.
    """

    overall_mean: float
    idx_below: np.ndarray
    idx_above: np.ndarray
    mean_below: float
    mean_above: float

    @property
    def n(self) -> int:
        return len(self.idx_below) + len(self.idx_above)

    @property
    def sum_below(self) -> float:
        return len(self.idx_below) * self.mean_below

    @property
    def sum_above(self) -> float:
        return len(self.idx_above) * self.mean_above

    def indicator_matrix(self) -> np.ndarray:
        """2 x n matrix whose rows are the group indicators (below, above)."""
        E = np.zeros((2, self.n))
        E[0, self.idx_below] = 1.0
        E[1, self.idx_above] = 1.0
        return E

    def targets(self) -> np.ndarray:
        """Right-hand side of the group-sum constraints."""
        return np.array([self.sum_below, self.sum_above])


def partition_by_mean(y) -> MeanPartition:
    y = np.asarray(y, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput("response contains NaN or Inf")
    if y.size < 2:
        raise DegeneratePartition("need at least two responses to partition")
    ybar = math.fsum(y) / y.size
    below = np.flatnonzero(y <= ybar)
    above = np.flatnonzero(y > ybar)
    if below.size == 0 or above.size == 0:
        raise DegeneratePartition("all responses equal; cannot form two groups")
    below.setflags(write=False)
    above.setflags(write=False)
    return MeanPartition(
        overall_mean=ybar,
        idx_below=below,
        idx_above=above,
        mean_below=math.fsum(y[below]) / below.size,
        mean_above=math.fsum(y[above]) / above.size,
    )


@dataclass(frozen=True)
class TrainTestSplit:
    train: Dataset
    test: Dataset
    seed: int
    train_rows: np.ndarray = field(repr=False, default=None)
    test_rows: np.ndarray = field(repr=False, default=None)


def split_train_test(data: Dataset, n_train: int, seed: int) -> TrainTestSplit:
    """Uniform random row split without replacement, reproducible from ``seed``."""
    if not 1 <= n_train < data.n:
        raise BadSize(f"n_train must satisfy 1 <= n_train < {data.n}, got {n_train}")
    perm = np.random.default_rng(seed).permutation(data.n)
    tr, te = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    return TrainTestSplit(data.subset(tr), data.subset(te), seed, tr, te)
