"""
Block subproblem solvers.

Every prediction-step minimization reduces, after completing the square, to

    min_{x in X}  theta(x) + beta/2 ||Ax - v||^2

and the multiplier step to a (possibly projected) explicit update.
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from pcadmm.model import (
    Box, ConstraintSense, Custom, Free, NonNeg, PcadmmError, Quadratic, SetSpec, ThetaAtom, WeightedL1, Zero,
)


_PIVOT_RTOL = 1e3 * np.finfo(np.float64).eps


class SingularSystem(PcadmmError):
    def __init__(self, message="Subproblem system is singular"):
        super().__init__(message)


class NonConvergence(PcadmmError):
    def __init__(self, message="Inner solver did not converge"):
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class SubproblemRequest:
    theta: ThetaAtom
    set: SetSpec
    A: np.ndarray
    beta: float
    v: np.ndarray
    orthogonal: bool = False
    x0: np.ndarray | None = None  # warm start for iterative solvers


def prox_shrink(v, tau):
    """Soft-threshold: sign(v) * max(|v| - tau, 0)."""
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def project_set(v, set_: SetSpec):
    v = np.asarray(v, dtype=np.float64)
    match set_:
        case Free():
            return v.copy()
        case NonNeg():
            return np.maximum(v, 0.0)
        case Box(lo=lo, hi=hi):
            return np.clip(v, lo, hi)
    raise TypeError(f'unknown set {type(set_).__name__}')


def solve_block_subproblem(req: SubproblemRequest, inner_tol: float, max_iters: int = 50000):
    """
    Approximately solve min_{x in X} theta(x) + beta/2 ||Ax - v||^2.

    Returns (x_tilde, A @ x_tilde).
    """
    theta = req.theta
    if isinstance(theta, Custom):
        x0 = _initial_point(req)
        x = project_set(theta.solve(req.A, req.beta, np.asarray(req.v, dtype=np.float64), x0), req.set)
    elif isinstance(theta, Quadratic) and isinstance(req.set, Free):
        x = _solve_normal_equations(theta, req.A, req.beta, req.v)
    elif isinstance(theta, (WeightedL1, Zero)) and req.orthogonal:
        x = _solve_orthogonal(theta, req.set, req.A, req.beta, req.v)
    else:
        x = _projected_gradient(req, inner_tol, max_iters)
    return x, req.A @ x


def solve_lambda_subproblem(lambda_ref, residual, beta, sense: ConstraintSense):
    """lambda_ref - beta * residual, projected onto the multiplier set."""
    lam = np.asarray(lambda_ref, dtype=np.float64) - beta * np.asarray(residual, dtype=np.float64)
    return ConstraintSense(sense).project_multiplier(lam)


def _initial_point(req):
    if req.x0 is not None:
        return project_set(req.x0, req.set)
    return project_set(np.zeros(req.A.shape[1]), req.set)


def _solve_normal_equations(theta, A, beta, v):
    # (H + beta A'A) x = beta A'v - c
    K = theta.H + beta * A.T @ A
    rhs = beta * A.T @ v - theta.c
    message = 'H + beta A\'A is singular; the block needs curvature or a set constraint'
    try:
        factor = linalg.cho_factor(K)
    except linalg.LinAlgError:
        raise SingularSystem(message)
    # a rank-deficient K can still factor with a roundoff-sized last pivot
    pivots = np.diag(factor[0]) ** 2
    if pivots.min() <= _PIVOT_RTOL * K.shape[0] * np.diag(K).max():
        raise SingularSystem(message)
    return linalg.cho_solve(factor, rhs)


def _solve_orthogonal(theta, set_, A, beta, v):
    # with A'A = cI the objective is separable around A'v / c
    scale = float(A[:, 0] @ A[:, 0])
    u = A.T @ v / scale
    if isinstance(theta, WeightedL1):
        u = prox_shrink(u, theta.tau / (beta * scale))
    return project_set(u, set_)


def _projected_gradient(req, inner_tol, max_iters):
    theta, A, beta = req.theta, req.A, req.beta
    n = A.shape[1]
    if isinstance(theta, Quadratic):
        H, c = theta.H, theta.c
    else:
        H, c = np.zeros((n, n)), np.zeros(n)
    tau = theta.tau if isinstance(theta, WeightedL1) else 0.0

    K = H + beta * A.T @ A
    lipschitz = linalg.eigvalsh(K)[-1]
    if lipschitz <= 0:
        raise SingularSystem('subproblem has no curvature (A = 0 and no quadratic term)')
    step = 1.0 / lipschitz
    linear = c - beta * A.T @ req.v

    x = _initial_point(req)
    gap = np.inf
    for _ in range(max_iters):
        z = x - step * (K @ x + linear)
        if tau:
            z = prox_shrink(z, step * tau)
        x_new = project_set(z, req.set)
        gap = np.linalg.norm(x_new - x) / step
        x = x_new
        if gap <= inner_tol:
            return x

    raise NonConvergence(f'projected gradient stopped after {max_iters} iterations with gradient map {gap:.3e}')
