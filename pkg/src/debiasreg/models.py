"""Constrained and unconstrained Lasso / kernel ridge regression.

The constrained variants add two linear equality constraints to the fit:
the average fitted value over the training rows whose response is at or
below the training mean must equal the average response of those rows, and
likewise for the rows above the mean. This keeps the fitted values from
being pulled toward the overall mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg as sla

from .data import Dataset, MeanPartition, partition_by_mean
from .errors import DimensionMismatch, MaxIterExceeded, SingularInnerSolve
from .kernels import (
    DEFAULT_JITTER,
    KernelSpec,
    cross_gram,
    gram,
    median_bandwidth,
    row_slices,
)
from .solver import (
    EqConstrainedQP, SolveResult, SolverOptions, admm_l1_eq, dual_ascent, solve_kkt,
    solve_saddle,
)


@dataclass(frozen=True)
class LinearFit:
    beta: np.ndarray
    intercept: float
    lam: float
    constraint_residual: float
    constrained: bool
    iterations: int = 0

    @property
    def n_features(self) -> int:
        return self.beta.size


@dataclass(frozen=True)
class KrrFit:
    alpha: np.ndarray
    multipliers: np.ndarray
    train_features: np.ndarray
    kernel: KernelSpec
    lam: float
    constraint_residual: float
    constrained: bool
    offset: float = 0.0
    iterations: int = 0

    @property
    def n_features(self) -> int:
        return self.train_features.shape[1]


Fit = Union[LinearFit, KrrFit]


def group_mean_gaps(y, y_hat, part: Optional[MeanPartition] = None) -> np.ndarray:
    """|Avg(y_hat) - Avg(y)| on the below-mean and above-mean groups."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    part = part or partition_by_mean(y)
    return np.array([
        abs(y_hat[part.idx_below].mean() - part.mean_below),
        abs(y_hat[part.idx_above].mean() - part.mean_above),
    ])


# ---------------------------------------------------------------------------
# Lasso


def _lasso_design(X, y, fit_intercept, standardize):
    x_mean = X.mean(axis=0) if fit_intercept else np.zeros(X.shape[1])
    y_mean = float(y.mean()) if fit_intercept else 0.0
    if standardize:
        x_scale = X.std(axis=0) if fit_intercept else np.sqrt((X**2).mean(axis=0))
        x_scale = np.where(x_scale > 0, x_scale, 1.0)
    else:
        x_scale = np.ones(X.shape[1])
    return (X - x_mean) / x_scale, y - y_mean, x_mean, x_scale, y_mean


def _to_original(beta_std, x_mean, x_scale, y_mean):
    beta = beta_std / x_scale
    return beta, float(y_mean - x_mean @ beta)


def lasso_cd(X, y, lam: float, tol: float = 1e-6, max_iter: int = 100000,
             beta0: Optional[np.ndarray] = None):
    """Cyclic coordinate descent for min ||y - X b||^2 + lam ||b||_1.

    Stops once every coordinate satisfies the subgradient optimality
    condition to ``tol``. Returns ``(beta, sweeps)``.
    """
    n, p = X.shape
    G = X.T @ X
    Xty = X.T @ y
    diag = np.diag(G).copy()
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    Gb = G @ beta
    half = lam / 2.0
    for sweep in range(1, max_iter + 1):
        for j in range(p):
            if diag[j] == 0.0:
                continue
            rho_j = Xty[j] - Gb[j] + diag[j] * beta[j]
            new = np.sign(rho_j) * max(abs(rho_j) - half, 0.0) / diag[j]
            delta = new - beta[j]
            if delta != 0.0:
                Gb += delta * G[:, j]
                beta[j] = new
        if lasso_kkt_violation(G, Xty, beta, lam, Gb) <= tol:
            return beta, sweep
    raise MaxIterExceeded(f"coordinate descent did not converge in {max_iter} sweeps",
                          beta)


def lasso_kkt_violation(G, Xty, beta, lam, Gb=None) -> float:
    """Largest violation of the Lasso subgradient conditions."""
    grad = 2.0 * (Xty - (G @ beta if Gb is None else Gb))  # minus gradient of the loss
    active = beta != 0
    v_active = np.abs(grad[active] - lam * np.sign(beta[active]))
    v_zero = np.maximum(np.abs(grad[~active]) - lam, 0.0)
    return float(max(v_active.max(initial=0.0), v_zero.max(initial=0.0)))


def fit_lasso(train: Dataset, lam: float, opts: Optional[SolverOptions] = None, *,
              fit_intercept: bool = True, standardize: bool = True) -> LinearFit:
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    X, y = train.features, train.response
    Xs, ys, x_mean, x_scale, y_mean = _lasso_design(X, y, fit_intercept, standardize)
    sweeps = 0
    if lam == 0 and np.linalg.matrix_rank(Xs) == Xs.shape[1]:
        beta_std = np.linalg.lstsq(Xs, ys, rcond=None)[0]
    else:
        max_iter = (opts or SolverOptions()).max_iter
        beta_std, sweeps = lasso_cd(Xs, ys, lam, max_iter=max_iter * 10)
    beta, intercept = _to_original(beta_std, x_mean, x_scale, y_mean)
    gaps = group_mean_gaps(y, X @ beta + intercept)
    return LinearFit(beta, intercept, float(lam), float(gaps.max()), False, sweeps)


def _lasso_constraints(Xs, part: MeanPartition, y_mean: float, fit_intercept: bool):
    rows_below = Xs[part.idx_below].sum(axis=0)
    rows_above = Xs[part.idx_above].sum(axis=0)
    t_below = len(part.idx_below) * (part.mean_below - y_mean)
    t_above = len(part.idx_above) * (part.mean_above - y_mean)
    if fit_intercept:
        # centred columns sum to zero, so the above-mean row is the negated
        # below-mean row and one constraint carries both
        return rows_below[None, :], np.array([t_below])
    return np.vstack([rows_below, rows_above]), np.array([t_below, t_above])


def fit_constrained_lasso(train: Dataset, lam: float, opts: Optional[SolverOptions] = None,
                          *, fit_intercept: bool = True,
                          standardize: bool = True) -> LinearFit:
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    opts = opts or SolverOptions()
    X, y = train.features, train.response
    part = partition_by_mean(y)
    Xs, ys, x_mean, x_scale, y_mean = _lasso_design(X, y, fit_intercept, standardize)
    A, b = _lasso_constraints(Xs, part, y_mean, fit_intercept)
    beta_std, diag = admm_l1_eq(Xs, ys, lam, A, b, opts)
    beta, intercept = _to_original(beta_std, x_mean, x_scale, y_mean)
    gaps = group_mean_gaps(y, X @ beta + intercept, part)
    return LinearFit(beta, intercept, float(lam), float(gaps.max()), True,
                     diag["iterations"])


# ---------------------------------------------------------------------------
# Kernel ridge regression


def default_kernel(train: Dataset) -> KernelSpec:
    return KernelSpec(bandwidth=median_bandwidth(train.features))


def _krr_solve(K: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    shifted = K + (lam / 2.0) * np.eye(K.shape[0])
    try:
        return sla.cho_solve(sla.cho_factor(shifted), y)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(shifted)
        if w.min() <= 0:
            raise SingularInnerSolve("K + (lambda/2) I is not positive definite")
        return V @ ((V.T @ y) / w)


def fit_krr(train: Dataset, kernel: Optional[KernelSpec], lam: float, *,
            center: bool = True) -> KrrFit:
    """Solve K (K + lam/2 I) alpha = K y through (K + lam/2 I) alpha = y."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    kernel = kernel or default_kernel(train)
    X, y = train.features, train.response
    offset = float(y.mean()) if center else 0.0
    K = gram(X, kernel).values
    alpha = _krr_solve(K, y - offset, lam)
    gaps = group_mean_gaps(y, K @ alpha + offset) if train.n >= 2 and np.ptp(y) > 0 \
        else np.zeros(2)
    return KrrFit(alpha, np.zeros(2), X, kernel, float(lam), float(gaps.max()), False,
                  offset)


def constrained_krr_qp(K: np.ndarray, y: np.ndarray, lam: float,
                       part: MeanPartition, offset: float = 0.0) -> EqConstrainedQP:
    """Quadratic program of the constrained KRR Lagrangian.

    Q = K (K + lam/2 I), c = K (y - offset), A stacks the column sums of the
    below-mean and above-mean row blocks of K, b holds the group sums of the
    (offset) response.
    """
    n = K.shape[0]
    shifted = K + (lam / 2.0) * np.eye(n)
    Q = K @ shifted
    Q = 0.5 * (Q + Q.T)
    K_below, K_above = row_slices(K, part)
    A = np.vstack([K_below.sum(axis=0), K_above.sum(axis=0)])
    b = np.array([part.sum_below - len(part.idx_below) * offset,
                  part.sum_above - len(part.idx_above) * offset])
    return EqConstrainedQP(Q, K @ (y - offset), A, b, factors=(K, shifted))


def _solve_krr_kkt(qp: EqConstrainedQP, part: MeanPartition, y_off: np.ndarray) -> SolveResult:
    """KKT solve for the constrained KRR program with the K factor divided out.

    Every term of the stationarity row carries a left factor K, which is
    nonsingular under jitter, so ``K (S a - y + M'rho) = 0`` reduces to
    ``S a + M'rho = y`` with S = K + lam/2 I and M the group indicators.
    This saddle system has the conditioning of S rather than of K S and the
    same solution and multipliers. Residuals are reported on the full program.
    """
    K, shifted = qp.factors
    ind = part.indicator_matrix()
    alpha, rho, steps = solve_saddle(shifted, ind.T, ind @ K, y_off, qp.b)
    stat, cons = qp.residuals(alpha, rho)
    return SolveResult(alpha, rho, steps, stat, cons, [cons])


def fit_constrained_krr(train: Dataset, kernel: Optional[KernelSpec], lam: float,
                        opts: Optional[SolverOptions] = None, method: str = "kkt", *,
                        center: bool = True) -> KrrFit:
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if method not in ("kkt", "dual_ascent"):
        raise ValueError(f"unknown method {method!r}")
    kernel = kernel or default_kernel(train)
    X, y = train.features, train.response
    part = partition_by_mean(y)
    offset = float(y.mean()) if center else 0.0
    K = gram(X, kernel).values
    qp = constrained_krr_qp(K, y, lam, part, offset)
    if method == "kkt":
        res = _solve_krr_kkt(qp, part, y - offset)
    else:
        res = dual_ascent(qp, opts or SolverOptions())
    gaps = group_mean_gaps(y, K @ res.x + offset, part)
    return KrrFit(res.x, res.multipliers, X, kernel, float(lam), float(gaps.max()), True,
                  offset, res.iterations)


# ---------------------------------------------------------------------------


def predict(fit: Fit, X_new) -> np.ndarray:
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim == 1:
        X_new = X_new.reshape(1, -1)
    if X_new.shape[1] != fit.n_features:
        raise DimensionMismatch(
            f"model expects {fit.n_features} features, got {X_new.shape[1]}")
    if isinstance(fit, LinearFit):
        return X_new @ fit.beta + fit.intercept
    return cross_gram(X_new, fit.train_features, fit.kernel) @ fit.alpha + fit.offset


def fitted_values(fit: Fit, train: Dataset) -> np.ndarray:
    """In-sample fitted values on the data the model was trained on.

    For kernel fits this is ``K alpha`` with the jittered Gram matrix, the
    quantity the group-mean constraints are imposed on. ``predict`` at the
    training inputs uses the jitter-free kernel and differs by
    ``jitter * alpha``.
    """
    if isinstance(fit, LinearFit):
        return predict(fit, train.features)
    if train.n != fit.train_features.shape[0] or not np.array_equal(
            train.features, fit.train_features):
        raise DimensionMismatch("dataset is not the one this kernel model was fitted on")
    return gram(fit.train_features, fit.kernel).values @ fit.alpha + fit.offset


def penalized_objective(fit: Fit, train: Dataset) -> float:
    """Training objective of the fit: squared error plus its penalty."""
    y = train.response
    if isinstance(fit, LinearFit):
        r = y - predict(fit, train.features)
        return float(r @ r + fit.lam * np.abs(fit.beta).sum())
    K = gram(fit.train_features, fit.kernel).values
    r = y - (K @ fit.alpha + fit.offset)
    return float(r @ r + fit.lam / 2.0 * fit.alpha @ K @ fit.alpha)


# ---------------------------------------------------------------------------
# Cross-validated regularization


def _folds(n: int, k: int, seed: int):
    k = max(2, min(k, n))
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def lasso_lambda_grid(train: Dataset, size: int = 25, ratio: float = 1e-4, *,
                      fit_intercept: bool = True, standardize: bool = True) -> np.ndarray:
    Xs, ys, *_ = _lasso_design(train.features, train.response, fit_intercept, standardize)
    lam_max = 2.0 * np.abs(Xs.T @ ys).max()
    if lam_max <= 0:
        return np.array([0.0])
    return lam_max * np.logspace(0.0, np.log10(ratio), size)


KRR_LAMBDA_GRID = np.logspace(-6, 3, 19)
BANDWIDTH_MULTIPLIERS = (0.5, 1.0, 2.0, 4.0, 8.0)


def select_index(mean_err: np.ndarray, se_err: np.ndarray, rule: str = "1se") -> int:
    """Pick a grid index from CV errors on a grid ordered by increasing smoothing.

    ``"min"`` takes the smallest error; ``"1se"`` takes the most smoothed
    point whose error is within one standard error of the minimum.
    """
    best = int(np.argmin(mean_err))
    if rule == "min":
        return int(np.flatnonzero(mean_err <= mean_err[best] * (1 + 1e-12)).max())
    if rule == "1se":
        return int(np.flatnonzero(mean_err <= mean_err[best] + se_err[best]).max())
    raise ValueError(f"unknown selection rule {rule!r}")


def _fold_stats(errs: np.ndarray):
    # errs: folds x grid of per-fold mean squared errors
    return errs.mean(axis=0), errs.std(axis=0, ddof=1) / np.sqrt(errs.shape[0])


def cv_lambda_lasso(train: Dataset, folds: int = 5, seed: int = 0,
                    grid: Optional[Sequence[float]] = None, rule: str = "1se", *,
                    fit_intercept: bool = True, standardize: bool = True) -> float:
    """Pick lambda for the unconstrained Lasso by k-fold CV on squared error."""
    grid = np.sort(np.asarray(
        grid if grid is not None else lasso_lambda_grid(
            train, fit_intercept=fit_intercept, standardize=standardize), dtype=float))
    fold_sets = _folds(train.n, folds, seed)
    errs = np.zeros((len(fold_sets), grid.size))
    for f, hold in enumerate(fold_sets):
        keep = np.setdiff1d(np.arange(train.n), hold)
        tr = train.subset(keep)
        Xs, ys, x_mean, x_scale, y_mean = _lasso_design(
            tr.features, tr.response, fit_intercept, standardize)
        beta_std = np.zeros(tr.p)
        for i in range(grid.size - 1, -1, -1):  # warm start from the sparse end
            beta_std, _ = lasso_cd(Xs, ys, grid[i], beta0=beta_std)
            beta, icpt = _to_original(beta_std, x_mean, x_scale, y_mean)
            r = train.response[hold] - (train.features[hold] @ beta + icpt)
            errs[f, i] = np.mean(r**2)
    return float(grid[select_index(*_fold_stats(errs), rule)])


def _krr_cv_errors(K: np.ndarray, y: np.ndarray, fold_sets, grid, center: bool):
    errs = np.zeros((len(fold_sets), grid.size))
    for f, hold in enumerate(fold_sets):
        keep = np.setdiff1d(np.arange(y.size), hold)
        offset = float(y[keep].mean()) if center else 0.0
        w, V = np.linalg.eigh(K[np.ix_(keep, keep)])
        proj = V.T @ (y[keep] - offset)
        K_cross = K[np.ix_(hold, keep)] @ V
        for i, lam in enumerate(grid):
            denom = w + lam / 2.0
            if denom.min() <= 0:
                errs[f, i] = np.inf
                continue
            r = y[hold] - (K_cross @ (proj / denom) + offset)
            errs[f, i] = np.mean(r**2)
    return errs


def cv_lambda_krr(train: Dataset, kernel: Optional[KernelSpec] = None, folds: int = 5,
                  seed: int = 0, grid: Optional[Sequence[float]] = None,
                  rule: str = "1se", *, center: bool = True) -> float:
    """Pick lambda for unconstrained KRR with a fixed kernel by k-fold CV."""
    kernel = kernel or default_kernel(train)
    grid = np.sort(np.asarray(grid if grid is not None else KRR_LAMBDA_GRID, dtype=float))
    K = gram(train.features, kernel).values
    errs = _krr_cv_errors(K, train.response, _folds(train.n, folds, seed), grid, center)
    return float(grid[select_index(*_fold_stats(errs), rule)])


def cv_krr(train: Dataset, folds: int = 5, seed: int = 0,
           grid: Optional[Sequence[float]] = None,
           multipliers: Sequence[float] = BANDWIDTH_MULTIPLIERS, rule: str = "1se", *,
           center: bool = True, jitter: float = DEFAULT_JITTER):
    """Jointly pick (bandwidth, lambda) for unconstrained KRR by k-fold CV.

    Bandwidths are multiples of the median pairwise distance. Under the
    ``"1se"`` rule the widest bandwidth whose best error is within one
    standard error of the overall minimum is kept; lambda is then the
    largest value within one standard error of that bandwidth's own best.
    Returns ``(KernelSpec, lambda)``.
    """
    grid = np.sort(np.asarray(grid if grid is not None else KRR_LAMBDA_GRID, dtype=float))
    mults = np.sort(np.asarray(multipliers, dtype=float))
    base = median_bandwidth(train.features)
    fold_sets = _folds(train.n, folds, seed)
    stats = [
        _fold_stats(_krr_cv_errors(
            gram(train.features, KernelSpec(base * m, jitter)).values,
            train.response, fold_sets, grid, center))
        for m in mults
    ]
    means = np.array([s[0] for s in stats])
    ses = np.array([s[1] for s in stats])
    bi, bj = np.unravel_index(np.argmin(means), means.shape)
    if rule == "min":
        i, j = bi, bj
    elif rule == "1se":
        thr = means[bi, bj] + ses[bi, bj]
        i = max(k for k in range(mults.size) if means[k].min() <= thr)
        j = select_index(means[i], ses[i], "1se")
    else:
        raise ValueError(f"unknown selection rule {rule!r}")
    return KernelSpec(base * mults[i], jitter), float(grid[j])
