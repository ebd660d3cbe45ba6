"""
Framework matrices for the prediction-correction schemes and their convergence checks.

All matrices act on xi = Pw = (sqrt(beta) A_1 x_1, ..., sqrt(beta) A_p x_p, lambda / sqrt(beta)),
a vector of (p + 1) m entries. Block templates are p x p (or 1 x p) and lifted with kron(., I_m).
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from pcadmm.model import ConfigError, DimensionError, PcadmmError, SeparableProblem, Variant

HM_TOL = 1e-13
CLOSED_FORM_TOL = 1e-13


class ClosedFormMismatch(PcadmmError):
    def __init__(self, message="G differs from its closed form"):
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class FrameworkMatrices:
    Q: np.ndarray
    M: np.ndarray
    H: np.ndarray
    G: np.ndarray
    nu: float
    variant: Variant
    p: int
    m: int


@dataclass(frozen=True)
class FrameworkReport:
    variant: Variant
    p: int
    m: int
    nu: float
    hm_eq_q_maxerr: float
    h_min_eig: float
    g_min_eig: float
    qtq_min_eig: float
    g_closed_form_maxerr: float

    @property
    def passed(self):
        return (self.hm_eq_q_maxerr <= HM_TOL
                and self.g_closed_form_maxerr <= CLOSED_FORM_TOL
                and self.h_min_eig > 0
                and self.g_min_eig > 0
                and self.qtq_min_eig > 0)


def _lift(template, m):
    return np.kron(template, np.eye(m))


def _check_sizes(p, m):
    if p < 1 or m < 1:
        raise ValueError(f'block count and constraint dimension must be positive, got p={p}, m={m}')


def _check_nu(nu):
    if not 0 < nu < 1:
        raise ConfigError('nu must lie in (0,1)')


def build_LIE(p: int, m: int):
    """
    L: lower-triangular p x p block matrix of identity blocks,
    I: the pm identity,
    E: the 1 x p block row of identity blocks.
    """
    _check_sizes(p, m)
    L = _lift(np.tril(np.ones((p, p))), m)
    E = _lift(np.ones((1, p)), m)
    return L, np.eye(p * m), E


def inverse_L(p: int, m: int):
    """Closed-form inverse of L: identity blocks on the diagonal, -I on the subdiagonal."""
    _check_sizes(p, m)
    return _lift(np.eye(p) - np.eye(p, k=-1), m)


def build_P(problem: SeparableProblem, beta: float):
    if not beta > 0:
        raise ValueError('beta must be positive')
    root = np.sqrt(beta)
    return linalg.block_diag(*[root * blk.A for blk in problem.blocks], np.eye(problem.m) / root)


def xi_from_aggregates(a, lam, beta):
    """P w computed from the aggregates A_i x_i directly."""
    root = np.sqrt(beta)
    return np.concatenate([root * np.asarray(a_i, dtype=np.float64) for a_i in a]
                          + [np.asarray(lam, dtype=np.float64) / root])


def stack_w(x, lam):
    return np.concatenate([np.asarray(x_i, dtype=np.float64) for x_i in x] + [np.asarray(lam, dtype=np.float64)])


def unstack_w(problem: SeparableProblem, w):
    w = np.asarray(w, dtype=np.float64)
    sizes = [blk.n for blk in problem.blocks]
    if w.shape != (sum(sizes) + problem.m,):
        raise DimensionError(f'stacked point has shape {w.shape}, expected ({sum(sizes) + problem.m},)')
    parts = np.split(w, np.cumsum(sizes))
    return parts[:-1], parts[-1]


def build_Q(variant: Variant, p: int, m: int):
    L, _, E = build_LIE(p, m)
    zeros = np.zeros((p * m, m))
    if Variant(variant) is Variant.PD:
        return np.block([[L, E.T], [zeros.T, np.eye(m)]])
    return np.block([[L, zeros], [-E, np.eye(m)]])


def build_M(variant: Variant, p: int, m: int, nu: float):
    _check_nu(nu)
    L_inv_T = inverse_L(p, m).T
    E = build_LIE(p, m)[2]
    zeros = np.zeros((p * m, m))
    if Variant(variant) is Variant.PD:
        # E L^{-T} = [I, 0, ..., 0]
        return np.block([[nu * L_inv_T, zeros], [-nu * (E @ L_inv_T), np.eye(m)]])
    return np.block([[nu * L_inv_T, zeros], [-E, np.eye(m)]])


def build_H(variant: Variant, p: int, m: int, nu: float):
    _check_nu(nu)
    L, _, E = build_LIE(p, m)
    top = (1.0 / nu) * (L @ L.T)
    if Variant(variant) is Variant.PD:
        return np.block([[top + E.T @ E, E.T], [E, np.eye(m)]])
    return linalg.block_diag(top, np.eye(m))


def closed_form_G(variant: Variant, p: int, m: int, nu: float):
    _check_nu(nu)
    _, I, E = build_LIE(p, m)
    if Variant(variant) is Variant.PD:
        return np.block([[(1 - nu) * I + E.T @ E, E.T], [E, np.eye(m)]])
    return linalg.block_diag((1 - nu) * I, np.eye(m))


def _g_from_definition(Q, M, H):
    # G := Q' + Q - M'HM
    return Q.T + Q - M.T @ (H @ M)


def build_G(variant: Variant, p: int, m: int, nu: float):
    G = _g_from_definition(build_Q(variant, p, m), build_M(variant, p, m, nu), build_H(variant, p, m, nu))
    err = np.abs(G - closed_form_G(variant, p, m, nu)).max()
    if err > CLOSED_FORM_TOL:
        raise ClosedFormMismatch(f'G for ({Variant(variant).value}, p={p}, m={m}, nu={nu}) '
                                 f'differs from its closed form by {err:.3e}')
    return G


def framework_matrices(variant: Variant, p: int, m: int, nu: float) -> FrameworkMatrices:
    variant = Variant(variant)
    return FrameworkMatrices(
        Q=build_Q(variant, p, m),
        M=build_M(variant, p, m, nu),
        H=build_H(variant, p, m, nu),
        G=build_G(variant, p, m, nu),
        nu=nu,
        variant=variant,
        p=p,
        m=m,
    )


def verify_framework(variant: Variant, p: int, m: int, nu: float) -> FrameworkReport:
    variant = Variant(variant)
    Q = build_Q(variant, p, m)
    M = build_M(variant, p, m, nu)
    H = build_H(variant, p, m, nu)
    G = _g_from_definition(Q, M, H)
    return FrameworkReport(
        variant=variant,
        p=p,
        m=m,
        nu=nu,
        hm_eq_q_maxerr=float(np.abs(H @ M - Q).max()),
        h_min_eig=float(linalg.eigvalsh(H)[0]),
        g_min_eig=float(linalg.eigvalsh(G)[0]),
        qtq_min_eig=float(linalg.eigvalsh(Q.T + Q)[0]),
        g_closed_form_maxerr=float(np.abs(G - closed_form_G(variant, p, m, nu)).max()),
    )


def operator_F(problem: SeparableProblem, w):
    """F(w) = (-A_1' lambda, ..., -A_p' lambda, sum_i A_i x_i - b)."""
    x, lam = unstack_w(problem, w)
    rows = [-blk.A.T @ lam for blk in problem.blocks]
    rows.append(problem.residual(problem.aggregates(x)))
    return np.concatenate(rows)


def check_skew(problem: SeparableProblem, w1, w2) -> float:
    """(w1 - w2)'(F(w1) - F(w2)); zero up to roundoff since F is affine with a skew-symmetric matrix."""
    w1 = np.asarray(w1, dtype=np.float64)
    w2 = np.asarray(w2, dtype=np.float64)
    return float((w1 - w2) @ (operator_F(problem, w1) - operator_F(problem, w2)))
