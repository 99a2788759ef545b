"""Gaussian RBF kernel, Gram matrices and the median bandwidth heuristic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .data import MeanPartition
from .errors import DimensionMismatch, IndexOutOfRange, NonFiniteInput

DEFAULT_JITTER = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """RBF kernel k(x, x') = exp(-||x - x'||^2 / bandwidth^2)."""

    bandwidth: float
    jitter: float = DEFAULT_JITTER
    kind: str = "rbf"

    def __post_init__(self):
        if self.kind != "rbf":
            raise ValueError(f"unsupported kernel kind {self.kind!r}")
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError("bandwidth must be a positive finite number")
        if not (np.isfinite(self.jitter) and self.jitter >= 0):
            raise ValueError("jitter must be nonnegative")


@dataclass(frozen=True)
class GramMatrix:
    values: np.ndarray
    spec: KernelSpec

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _check(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DimensionMismatch("expected a non-empty 2-d feature matrix")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("feature matrix contains NaN or Inf")
    return X


def _rbf(sqdist: np.ndarray, bandwidth: float) -> np.ndarray:
    return np.exp(-sqdist / bandwidth**2)


def gram(X, spec: KernelSpec) -> GramMatrix:
    X = _check(X)
    # cdist computes every entry independently; no cancellation as in the
    # ||a||^2 + ||b||^2 - 2ab expansion, so K is exactly symmetric with unit diagonal
    K = _rbf(cdist(X, X, "sqeuclidean"), spec.bandwidth)
    K[np.diag_indices_from(K)] = 1.0 + spec.jitter
    K.setflags(write=False)
    return GramMatrix(K, spec)


def cross_gram(X_new, X_train, spec: KernelSpec) -> np.ndarray:
    X_new, X_train = _check(X_new), _check(X_train)
    if X_new.shape[1] != X_train.shape[1]:
        raise DimensionMismatch(
            f"X_new has {X_new.shape[1]} columns, X_train has {X_train.shape[1]}")
    return _rbf(cdist(X_new, X_train, "sqeuclidean"), spec.bandwidth)


def row_slices(K: GramMatrix, partition: MeanPartition):
    """Rows of K indexed by the below and above groups, in index order."""
    values = K.values if isinstance(K, GramMatrix) else np.asarray(K)
    n = values.shape[0]
    idx = np.concatenate([partition.idx_below, partition.idx_above])
    if values.shape != (n, n) or partition.n != n:
        raise IndexOutOfRange(f"partition covers {partition.n} rows, K is {values.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexOutOfRange("partition index outside Gram matrix")
    return values[partition.idx_below], values[partition.idx_above]


def median_bandwidth(X) -> float:
    """Median pairwise Euclidean distance; 1.0 when it is degenerate."""
    X = _check(X)
    if X.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(X)))
    return med if med > 0 else 1.0
