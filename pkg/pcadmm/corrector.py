"""
Correction steps on the aggregates (A_1 x_1, ..., A_p x_p, lambda).

Only vector additions; the matrix form lives in `pcadmm.matrices` and is used for checks.
"""
import numpy as np

from pcadmm.model import ConfigError, DimensionError, IterateState, PredictorState, Variant


def correct_pd(state: IterateState, pred: PredictorState, nu: float, beta: float) -> IterateState:
    d, d_lam = _directions(state, pred, nu)
    lam = state.lam + nu * beta * d[0] - d_lam
    return IterateState(_correct_aggregates(state.a, d, nu), lam)


def correct_dp(state: IterateState, pred: PredictorState, nu: float, beta: float) -> IterateState:
    # the multiplier row spans every block with coefficient beta, not nu * beta
    d, d_lam = _directions(state, pred, nu)
    lam = state.lam + beta * np.sum(d, axis=0) - d_lam
    return IterateState(_correct_aggregates(state.a, d, nu), lam)


def correct(variant: Variant, state: IterateState, pred: PredictorState, nu: float, beta: float) -> IterateState:
    if Variant(variant) is Variant.PD:
        return correct_pd(state, pred, nu, beta)
    return correct_dp(state, pred, nu, beta)


def _directions(state, pred, nu):
    if not 0 < nu < 1:
        raise ConfigError('nu must lie in (0,1)')
    if len(state.a) != len(pred.a_tilde):
        raise DimensionError(f'state has {len(state.a)} aggregates, predictor has {len(pred.a_tilde)}')
    if state.lam.shape != pred.lambda_tilde.shape:
        raise DimensionError('state and predictor multipliers differ in length')
    try:
        d = np.stack([a - a_t for a, a_t in zip(state.a, pred.a_tilde)])
    except ValueError:
        raise DimensionError('state and predictor aggregates differ in length')
    return d, state.lam - pred.lambda_tilde


def _correct_aggregates(a, d, nu):
    p = len(a)
    out = []
    for i in range(p):
        a_next = a[i] - nu * d[i]
        if i + 1 < p:
            a_next = a_next + nu * d[i + 1]
        out.append(a_next)
    return out
