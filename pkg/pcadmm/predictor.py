"""Gauss-Seidel prediction sweeps for the primal-dual and dual-primal variants."""
import numpy as np

from pcadmm.matrices import build_P, build_Q, xi_from_aggregates
from pcadmm.model import (
    ConstraintSense, DimensionError, Free, IterateState, PredictorState, Quadratic, SeparableProblem, Variant,
)
from pcadmm.prox import NonConvergence, SingularSystem, SubproblemRequest, solve_block_subproblem, solve_lambda_subproblem


def predict_pd(problem: SeparableProblem,
               state: IterateState,
               beta: float,
               inner_tol: float,
               warm: PredictorState | None = None,
               inner_max_iters: int = 50000,
               ) -> PredictorState:
    """Blocks 1..p against lambda^k, then the multiplier against the fresh aggregates."""
    _check_state(problem, state, beta)
    x_tilde, a_tilde = _sweep(problem, state, state.lam / beta, beta, inner_tol, warm, inner_max_iters)
    lambda_tilde = solve_lambda_subproblem(state.lam, problem.residual(a_tilde), beta, problem.sense)
    return PredictorState(x_tilde, a_tilde, lambda_tilde)


def predict_dp(problem: SeparableProblem,
               state: IterateState,
               beta: float,
               inner_tol: float,
               warm: PredictorState | None = None,
               inner_max_iters: int = 50000,
               ) -> PredictorState:
    """The multiplier first against the current aggregates, then blocks 1..p against it."""
    _check_state(problem, state, beta)
    lambda_tilde = solve_lambda_subproblem(state.lam, problem.residual(state.a), beta, problem.sense)
    x_tilde, a_tilde = _sweep(problem, state, lambda_tilde / beta, beta, inner_tol, warm, inner_max_iters)
    return PredictorState(x_tilde, a_tilde, lambda_tilde)


def predict(variant: Variant, problem, state, beta, inner_tol, warm=None, inner_max_iters=50000) -> PredictorState:
    if Variant(variant) is Variant.PD:
        return predict_pd(problem, state, beta, inner_tol, warm, inner_max_iters)
    return predict_dp(problem, state, beta, inner_tol, warm, inner_max_iters)


def prediction_residual(problem: SeparableProblem,
                        state: IterateState,
                        pred: PredictorState,
                        beta: float,
                        variant: Variant) -> float:
    """
    Residual of the prediction VI when it is an equality system.

    With quadratic atoms, free sets and equality constraints the predictor must satisfy
    grad theta(u~) + F(w~) = P'Q(xi^k - xi~^k); this returns the norm of the difference.
    """
    if problem.sense is not ConstraintSense.EQUALITY or not all(
            isinstance(blk.theta, Quadratic) and isinstance(blk.set, Free) for blk in problem.blocks):
        raise ValueError('prediction residual needs equality constraints and quadratic/free blocks')

    rows = [blk.theta.gradient(x) - blk.A.T @ pred.lambda_tilde
            for blk, x in zip(problem.blocks, pred.x_tilde)]
    rows.append(problem.residual(pred.a_tilde))

    P = build_P(problem, beta)
    Q = build_Q(variant, problem.p, problem.m)
    xi = xi_from_aggregates(state.a, state.lam, beta)
    xi_tilde = xi_from_aggregates(pred.a_tilde, pred.lambda_tilde, beta)
    return float(np.linalg.norm(np.concatenate(rows) - P.T @ (Q @ (xi - xi_tilde))))


def _check_state(problem, state, beta):
    if not beta > 0:
        raise ValueError('beta must be positive')
    if len(state.a) != problem.p:
        raise DimensionError(f'state has {len(state.a)} aggregates, problem has {problem.p} blocks')
    if state.lam.shape != (problem.m,):
        raise DimensionError(f'lambda has shape {state.lam.shape}, expected ({problem.m},)')


def _sweep(problem, state, shift, beta, inner_tol, warm, inner_max_iters):
    # v_i = a_i - sum_{j<i} (a~_j - a_j) + shift, shift = lambda/beta for the variant's lambda
    x_tilde, a_tilde = [], []
    drift = np.zeros(problem.m)
    for i, blk in enumerate(problem.blocks):
        req = SubproblemRequest(
            theta=blk.theta,
            set=blk.set,
            A=blk.A,
            beta=beta,
            v=state.a[i] - drift + shift,
            orthogonal=blk.orthogonal,
            x0=None if warm is None else warm.x_tilde[i],
        )
        try:
            x_i, a_i = solve_block_subproblem(req, inner_tol, inner_max_iters)
        except (SingularSystem, NonConvergence) as e:
            raise type(e)(f'block {i + 1}: {e}') from e
        drift = drift + (a_i - state.a[i])
        x_tilde.append(x_i)
        a_tilde.append(a_i)
    return x_tilde, a_tilde
