"""Solvers for equality-constrained quadratic programs and the L1 variant.

All quadratic programs share the convention

    minimize   1/2 x'Qx - c'x   subject to   Ax = b

with Lagrangian ``L(x, rho) = 1/2 x'Qx - c'x + rho'(Ax - b)``, so the
optimality (KKT) system reads ``[Q A'; A 0] [x; rho] = [c; b]``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from .errors import (
    DimensionMismatch,
    InfeasibleConstraint,
    MaxIterExceeded,
    NonFiniteInput,
    SingularInnerSolve,
    SingularKKT,
)


@dataclass(frozen=True)
class EqConstrainedQP:
    """Quadratic objective with linear equality constraints.

    ``factors`` optionally gives matrices ``(F1, F2)`` with ``Q = F1 @ F2``;
    when present, inner solves with Q go through the two factors instead of
    factorizing the (possibly badly conditioned) product.
    """

    Q: np.ndarray
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    factors: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        c = np.asarray(self.c, dtype=float).ravel()
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        n = c.size
        if Q.shape != (n, n):
            raise DimensionMismatch(f"Q is {Q.shape}, expected ({n}, {n})")
        if A.shape[1] != n or A.shape[0] != b.size:
            raise DimensionMismatch(f"A is {A.shape}, b has {b.size} entries, n={n}")
        if A.shape[0] > n:
            raise DimensionMismatch("more constraints than variables")
        for name, arr in (("Q", Q), ("c", c), ("A", A), ("b", b)):
            if not np.all(np.isfinite(arr)):
                raise NonFiniteInput(f"{name} contains NaN or Inf")
        scale = max(1.0, np.abs(Q).max())
        if np.abs(Q - Q.T).max() > 1e-10 * scale:
            raise ValueError("Q must be symmetric")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return self.b.size

    def lagrangian(self, x, rho) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x - self.c @ x + rho @ (self.A @ x - self.b))

    def lagrangian_grad(self, x, rho) -> np.ndarray:
        """Gradient of the Lagrangian in x: Qx - c + A'rho."""
        return self.Q @ x - self.c + self.A.T @ rho

    def residuals(self, x, rho) -> Tuple[float, float]:
        """(stationarity, constraint) residuals in the infinity norm."""
        stat = np.abs(self.lagrangian_grad(x, rho)).max(initial=0.0)
        cons = np.abs(self.A @ x - self.b).max(initial=0.0)
        return float(stat), float(cons)


@dataclass
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 10000
    step_rule: str = "exact_line_search"
    step_size: float = 1.0  # used when step_rule == "fixed"
    admm_penalty: float = 1.0
    admm_tol_abs: float = 1e-6
    admm_tol_rel: float = 1e-6

    def __post_init__(self):
        if self.step_rule not in ("exact_line_search", "fixed"):
            raise ValueError(f"unknown step_rule {self.step_rule!r}")
        for name in ("tol", "step_size", "admm_penalty", "admm_tol_abs", "admm_tol_rel"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class SolveResult:
    x: np.ndarray
    multipliers: np.ndarray
    iterations: int
    stationarity_residual: float
    constraint_residual: float
    constraint_history: list = field(default_factory=list, repr=False)

    @property
    def residuals_monotone(self) -> bool:
        h = self.constraint_history
        return all(b <= a * (1 + 1e-12) + 1e-300 for a, b in zip(h, h[1:]))


def _check_row_rank(A: np.ndarray, exc=SingularKKT):
    if A.shape[0] and np.linalg.matrix_rank(A) < A.shape[0]:
        raise exc("constraint matrix does not have full row rank")


def _converged(qp: EqConstrainedQP, x, rho, tol: float) -> bool:
    # stationarity as a normwise backward error: the inner solve cannot do
    # better than roundoff times the size of the terms in Qx - c + A'rho
    grad = qp.lagrangian_grad(x, rho)
    terms = (np.abs(qp.Q @ x).max(initial=0.0) + np.abs(qp.c).max(initial=0.0)
             + np.abs(qp.A.T @ rho).max(initial=0.0))
    stat_ok = np.abs(grad).max(initial=0.0) <= tol * max(terms, 1.0)
    cons_ok = np.abs(qp.A @ x - qp.b).max(initial=0.0) <= tol * max(
        1.0, np.abs(qp.b).max(initial=0.0) * 1e-2)
    return bool(stat_ok and cons_ok)


def solve_saddle(H, B_top, B_bottom, f, g, refine_steps: int = 3):
    """Solve ``[H B_top; B_bottom 0] [x; y] = [f; g]`` by LU with refinement.

    Returns ``(x, y, refinement_steps)``. Refinement stops early once a step
    no longer reduces the residual.
    """
    n, m = H.shape[0], B_bottom.shape[0]
    M = np.zeros((n + m, n + m))
    M[:n, :n] = H
    M[:n, n:] = B_top
    M[n:, :n] = B_bottom
    rhs = np.concatenate([f, g])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(M)
        pivots = np.abs(np.diag(lu))
        if pivots.min() <= np.finfo(float).eps * pivots.max() * 1e-4:
            raise SingularKKT("KKT matrix is singular")
        z = sla.lu_solve((lu, piv), rhs)
        r = rhs - M @ z
        steps = 0
        for _ in range(refine_steps):
            if not np.abs(r).max() > 0:
                break
            z_new = z + sla.lu_solve((lu, piv), r)
            r_new = rhs - M @ z_new
            if np.abs(r_new).max() >= np.abs(r).max():
                break
            z, r = z_new, r_new
            steps += 1
    if not np.all(np.isfinite(z)):
        raise SingularKKT("KKT solve produced non-finite values")
    return z[:n], z[n:], steps


def solve_kkt(qp: EqConstrainedQP, refine_steps: int = 3) -> SolveResult:
    """Direct LU solve of the saddle-point system with iterative refinement."""
    _check_row_rank(qp.A)
    x, rho, steps = solve_saddle(qp.Q, qp.A.T, qp.A, qp.c, qp.b, refine_steps)
    stat, cons = qp.residuals(x, rho)
    return SolveResult(x, rho, steps, stat, cons, [cons])


def _inner_solver(qp: EqConstrainedQP) -> Callable[[np.ndarray], np.ndarray]:
    """Return a function solving Q x = r (vector or matrix right side)."""
    def factor(F):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                lu = sla.lu_factor(F)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise SingularInnerSolve(str(exc)) from exc
        d = np.abs(np.diag(lu[0]))
        if d.min() <= np.finfo(float).eps * d.max() * 1e-4:
            raise SingularInnerSolve("inner system is singular; add jitter upstream")
        return lu

    if qp.factors is not None:
        F1, F2 = (np.asarray(F, dtype=float) for F in qp.factors)
        lu1, lu2 = factor(F1), factor(F2)
        return lambda r: sla.lu_solve(lu2, sla.lu_solve(lu1, r))
    try:
        cho = sla.cho_factor(qp.Q)
        return lambda r: sla.cho_solve(cho, r)
    except np.linalg.LinAlgError:
        lu = factor(qp.Q)
        return lambda r: sla.lu_solve(lu, r)


STALL_WINDOW = 500  # iterations without a new best residual before giving up


def dual_ascent(qp: EqConstrainedQP, opts: Optional[SolverOptions] = None) -> SolveResult:
    """Alternate exact minimization in x with gradient ascent on the multipliers.

    Each iteration solves ``Q x = c - A'rho`` and then moves
    ``rho <- rho + s (A x - b)``. With ``step_rule="exact_line_search"`` the
    step maximizes the (quadratic) dual function along the gradient,
    ``s = |g|^2 / (g' A Q^-1 A' g)``.
    """
    opts = opts or SolverOptions()
    _check_row_rank(qp.A, SingularInnerSolve)
    solve = _inner_solver(qp)
    A, b = qp.A, qp.b
    x0 = solve(qp.c)
    QinvAt = solve(A.T) if qp.m else np.zeros((qp.n, 0))
    W = A @ QinvAt  # dual Hessian (negated)
    rho = np.zeros(qp.m)
    history = []
    best = None
    for it in range(1, opts.max_iter + 1):
        if best is not None and it - best.iterations > STALL_WINDOW:
            break
        x = x0 - QinvAt @ rho
        g = A @ x - b
        stat, cons = qp.residuals(x, rho)
        history.append(cons)
        result = SolveResult(x, rho.copy(), it, stat, cons, history)
        if best is None or cons < best.constraint_residual:
            best = result
        if _converged(qp, x, rho, opts.tol):
            return result
        if opts.step_rule == "exact_line_search":
            curv = g @ W @ g
            if not curv > 0:
                raise SingularInnerSolve("dual curvature is not positive")
            step = (g @ g) / curv
        else:
            step = opts.step_size
        rho = rho + step * g
    best.constraint_history = history
    raise MaxIterExceeded(
        f"dual ascent stopped after {len(history)} iterations without converging "
        f"(constraint residual {best.constraint_residual:.3e})", best)


def soft_threshold(v, kappa):
    return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)


def check_feasible(A: np.ndarray, b: np.ndarray) -> None:
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.linalg.norm(A @ sol - b) > 1e-8 * (1 + np.linalg.norm(b)):
        raise InfeasibleConstraint("b is not in the range of A")


def admm_l1_eq(X, y, lam: float, A, b, opts: Optional[SolverOptions] = None):
    """Solve min ||y - X beta||^2 + lam ||beta||_1 subject to A beta = b.

    Two-block ADMM on the splitting beta = z: the beta block is an
    equality-constrained least-squares step (its KKT matrix is factorized
    once per penalty value), the z block is soft-thresholding. The penalty
    is adapted by residual balancing.

    Returns ``(beta, diagnostics)``; ``beta`` is the feasible block.
    """
    opts = opts or SolverOptions()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    n, p = X.shape
    if y.size != n or A.shape[1] != p or A.shape[0] != b.size:
        raise DimensionMismatch("inconsistent shapes for X, y, A, b")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    for arr in (X, y, A, b):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInput("ADMM input contains NaN or Inf")
    _check_row_rank(A)
    check_feasible(A, b)

    m = A.shape[0]
    H = 2.0 * X.T @ X
    Xty2 = 2.0 * X.T @ y
    rho = float(opts.admm_penalty)

    def factorize(rho):
        M = np.zeros((p + m, p + m))
        M[:p, :p] = H + rho * np.eye(p)
        M[:p, p:] = A.T
        M[p:, :p] = A
        return sla.lu_factor(M)

    lu = factorize(rho)
    z = np.zeros(p)
    u = np.zeros(p)
    beta = z
    nu = np.zeros(m)
    sqrt_p = np.sqrt(p)
    r_norm = s_norm = np.inf
    for it in range(1, opts.max_iter + 1):
        sol = sla.lu_solve(lu, np.concatenate([Xty2 + rho * (z - u), b]))
        beta, nu = sol[:p], sol[p:]
        z_old = z
        z = soft_threshold(beta + u, lam / rho)
        u = u + beta - z
        r_norm = np.linalg.norm(beta - z)
        s_norm = rho * np.linalg.norm(z - z_old)
        eps_pri = sqrt_p * opts.admm_tol_abs + opts.admm_tol_rel * max(
            np.linalg.norm(beta), np.linalg.norm(z))
        eps_dual = sqrt_p * opts.admm_tol_abs + opts.admm_tol_rel * rho * np.linalg.norm(u)
        if r_norm <= eps_pri and s_norm <= eps_dual:
            break
        if r_norm > 10 * s_norm:
            rho *= 2.0
            u /= 2.0
            lu = factorize(rho)
        elif s_norm > 10 * r_norm:
            rho /= 2.0
            u *= 2.0
            lu = factorize(rho)
    else:
        diag = _admm_diag(X, y, lam, A, b, beta, z, it, r_norm, s_norm, rho)
        raise MaxIterExceeded(
            f"ADMM did not converge in {opts.max_iter} iterations", (beta, diag))
    return beta, _admm_diag(X, y, lam, A, b, beta, z, it, r_norm, s_norm, rho)


def _admm_diag(X, y, lam, A, b, beta, z, it, r_norm, s_norm, rho):
    return {
        "iterations": it,
        "primal_residual": float(r_norm),
        "dual_residual": float(s_norm),
        "penalty": rho,
        "constraint_residual": float(np.abs(A @ beta - b).max(initial=0.0)),
        "objective": float(np.sum((y - X @ beta) ** 2) + lam * np.abs(beta).sum()),
        "z": z,
    }
