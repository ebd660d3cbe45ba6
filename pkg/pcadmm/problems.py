"""
Benchmark problem generators with independent solution oracles.

Random instances draw H_i with spectrum uniform in [1, 10] (random orthogonal eigenbasis),
and c_i, A_i, b from the standard normal distribution, all from
numpy.random.default_rng(seed). The oracles never touch the predictor or the corrector.
"""
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from loguru import logger
from scipy import linalg

from pcadmm.model import (
    BlockSpec, Box, ConstraintSense, Free, NonNeg, PcadmmError, Quadratic, SaddlePoint, SeparableProblem, WeightedL1,
    objective_value,
)
from pcadmm.prox import prox_shrink

SUITES = ('eq-qp', 'ineq-qp', 'lasso', 'svm')

MAX_ENUMERATED_ROWS = 12
KKT_TOL = 1e-9


class OracleFailure(PcadmmError):
    def __init__(self, message="Oracle could not solve the instance"):
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class BenchmarkCase:
    label: str
    problem: SeparableProblem
    reference: SaddlePoint | None


def random_spd(rng: np.random.Generator, n: int, low=1.0, high=10.0) -> np.ndarray:
    basis, _ = np.linalg.qr(rng.standard_normal((n, n)))
    H = (basis * rng.uniform(low, high, n)) @ basis.T
    return (H + H.T) / 2


def _block_dims(p, block_dims):
    if isinstance(block_dims, int):
        return [block_dims] * p
    dims = [int(n) for n in block_dims]
    if len(dims) != p:
        raise ValueError(f'expected {p} block dimensions, got {len(dims)}')
    return dims


def _random_qp(p, block_dims, m, seed, sense):
    dims = _block_dims(p, block_dims)
    if sum(dims) < m:
        raise ValueError(f'total dimension {sum(dims)} is smaller than m={m}')
    rng = np.random.default_rng(seed)
    blocks = [
        BlockSpec(Quadratic(random_spd(rng, n), rng.standard_normal(n)), Free(), rng.standard_normal((m, n)))
        for n in dims
    ]
    problem = SeparableProblem(blocks, rng.standard_normal(m), sense)
    return problem, solve_qp_oracle(problem)


def gen_eq_qp(p: int, block_dims, m: int, seed: int):
    """Equality-constrained QP with quadratic/free blocks, solved by a dense KKT solve."""
    return _random_qp(p, block_dims, m, seed, ConstraintSense.EQUALITY)


def gen_ineq_qp(p: int, block_dims, m: int, seed: int):
    """Inequality-constrained QP (sum A_i x_i >= b), solved by active-set enumeration."""
    if m > 4:
        raise ValueError('active-set enumeration is limited to m <= 4')
    return _random_qp(p, block_dims, m, seed, ConstraintSense.GREATER_EQUAL)


def lasso_problem(D, d, tau) -> SeparableProblem:
    """min 1/2 ||Dx - d||^2 + tau ||y||_1  s.t.  x - y = 0 (the constant 1/2 ||d||^2 is dropped)."""
    D = np.atleast_2d(np.asarray(D, dtype=np.float64))
    d = np.atleast_1d(np.asarray(d, dtype=np.float64))
    n = D.shape[1]
    blocks = [
        BlockSpec(Quadratic(D.T @ D, -D.T @ d), Free(), np.eye(n), orthogonal=True),
        BlockSpec(WeightedL1(tau), Free(), -np.eye(n), orthogonal=True),
    ]
    return SeparableProblem(blocks, np.zeros(n), ConstraintSense.EQUALITY)


def lasso_oracle(D, d, tau, tol=1e-12, max_iters=1_000_000) -> SaddlePoint:
    """Proximal gradient on 1/2 ||Dx - d||^2 + tau ||x||_1 until the gradient map is below `tol`."""
    D = np.atleast_2d(np.asarray(D, dtype=np.float64))
    d = np.atleast_1d(np.asarray(d, dtype=np.float64))
    H = D.T @ D
    g0 = D.T @ d
    step = 1.0 / linalg.eigvalsh(H)[-1]

    x = np.zeros(D.shape[1])
    for _ in range(max_iters):
        x_new = prox_shrink(x - step * (H @ x - g0), step * tau)
        gap = np.linalg.norm(x_new - x) / step
        x = x_new
        if gap <= tol:
            break
    else:
        raise OracleFailure(f'proximal gradient did not reach {tol} in {max_iters} iterations')

    problem = lasso_problem(D, d, tau)
    return SaddlePoint(
        x=(x, x),
        a=(x, -x),
        lam=H @ x - g0,
        objective=objective_value(problem, [x, x]),
    )


def gen_lasso(n: int, samples: int, tau: float, seed: int):
    if not tau > 0:
        raise ValueError('tau must be positive')
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((samples, n))
    d = rng.standard_normal(samples)
    return lasso_problem(D, d, tau), lasso_oracle(D, d, tau)


def _toy_points(count, rng):
    labels = np.where(np.arange(count) % 2 == 0, 1.0, -1.0)
    X = labels[:, None] * 1.5 + 0.5 * rng.standard_normal((count, 2))
    return X, labels


def gen_toy_svm(points, seed: int = 0, penalty: float = 1.0):
    """
    Soft-margin linear SVM without bias:

        min 1/2 ||w||^2 + penalty * sum(s)  s.t.  y_j x_j'w + s_j >= 1,  s >= 0.

    `points` is either a count (drawn from two seeded clusters) or a pair (X, y) with y in {-1, +1}.
    """
    if isinstance(points, int):
        if points < 2:
            raise ValueError('toy SVM needs at least two points')
        X, y = _toy_points(points, np.random.default_rng(seed))
    else:
        X, y = points
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or len(y) < 2 or X.shape[0] != len(y):
        raise ValueError('toy SVM needs at least two labelled points')
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError('labels must be -1 or +1')
    if np.unique(y).size < 2:
        raise ValueError('toy SVM needs points from both classes')

    count, dim = X.shape
    blocks = [
        BlockSpec(Quadratic(np.eye(dim), np.zeros(dim)), Free(), y[:, None] * X),
        BlockSpec(Quadratic(np.zeros((count, count)), penalty * np.ones(count)), NonNeg(), np.eye(count)),
    ]
    problem = SeparableProblem(blocks, np.ones(count), ConstraintSense.GREATER_EQUAL)
    reference = solve_qp_oracle(problem) if 2 * count <= MAX_ENUMERATED_ROWS else None
    return problem, reference


def solve_qp_oracle(problem: SeparableProblem) -> SaddlePoint:
    """
    Saddle point of a problem whose blocks are all quadratic.

    Equality problems with free sets are solved through the dense KKT system
    [blkdiag(H_i), -A'; A, 0] (x, lambda) = (-c, b); everything else by enumerating
    active sets of the coupling rows (for >=) and the NonNeg/Box bound rows.
    """
    if not all(isinstance(blk.theta, Quadratic) for blk in problem.blocks):
        raise OracleFailure('the QP oracle needs quadratic atoms in every block')

    H = linalg.block_diag(*[blk.theta.H for blk in problem.blocks])
    c = np.concatenate([blk.theta.c for blk in problem.blocks])
    A = np.hstack([blk.A for blk in problem.blocks])
    b = np.asarray(problem.b)
    G, h = _bound_rows(problem)

    if problem.sense is ConstraintSense.EQUALITY and G.shape[0] == 0:
        x, lam = _kkt_solve(H, c, A, b)
    elif problem.sense is ConstraintSense.EQUALITY:
        x, mult, _ = _active_set(H, c, A, b, G, h)
        lam = mult
    else:
        x, _, mu = _active_set(H, c, np.zeros((0, A.shape[1])), np.zeros(0), np.vstack([A, G]), np.concatenate([b, h]))
        lam = np.maximum(mu[:problem.m], 0.0)

    parts = np.split(x, np.cumsum([blk.n for blk in problem.blocks])[:-1])
    return SaddlePoint(
        x=parts,
        a=problem.aggregates(parts),
        lam=lam,
        objective=objective_value(problem, parts),
    )


def _bound_rows(problem):
    # set constraints written as G x >= h on the stacked x
    n_total = sum(blk.n for blk in problem.blocks)
    rows, rhs = [], []
    offset = 0
    for blk in problem.blocks:
        eye = np.eye(n_total)[offset:offset + blk.n]
        if isinstance(blk.set, NonNeg):
            rows.append(eye)
            rhs.append(np.zeros(blk.n))
        elif isinstance(blk.set, Box):
            rows.extend([eye, -eye])
            rhs.extend([blk.set.lo, -blk.set.hi])
        offset += blk.n
    if not rows:
        return np.zeros((0, n_total)), np.zeros(0)
    return np.vstack(rows), np.concatenate(rhs)


def _kkt_solve(H, c, A, b):
    n, m = H.shape[0], A.shape[0]
    K = np.block([[H, -A.T], [A, np.zeros((m, m))]])
    try:
        sol = np.linalg.solve(K, np.concatenate([-c, b]))
    except np.linalg.LinAlgError:
        raise OracleFailure('singular KKT system; regenerate with another seed')
    return sol[:n], sol[n:]


def _active_set(H, c, Ae, be, Gi, hi):
    """
    Enumerate active subsets S of the rows Gi x >= hi, keep KKT points with nonnegative
    multipliers that are feasible for every row, and return the one with the lowest objective.
    """
    n = H.shape[0]
    n_eq, k = Ae.shape[0], Gi.shape[0]
    if k > MAX_ENUMERATED_ROWS:
        raise OracleFailure(f'{k} inequality rows exceed the enumeration cap of {MAX_ENUMERATED_ROWS}')

    best = None
    for size in range(k + 1):
        for active in combinations(range(k), size):
            active = list(active)
            C = np.vstack([Ae, Gi[active]])
            rhs = np.concatenate([-c, be, hi[active]])
            K = np.block([[H, -C.T], [C, np.zeros((C.shape[0], C.shape[0]))]])
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
            if np.linalg.norm(K @ sol - rhs) > KKT_TOL * (1 + np.linalg.norm(rhs)):
                continue
            x, mult = sol[:n], sol[n:]
            if np.any(mult[n_eq:] < -KKT_TOL) or np.any(Gi @ x - hi < -KKT_TOL):
                continue
            objective = 0.5 * x @ H @ x + c @ x
            if best is None or objective < best[0] - 1e-12:
                mu = np.zeros(k)
                mu[active] = mult[n_eq:]
                best = (objective, x, mult[:n_eq], mu)

    if best is None:
        raise OracleFailure('no active set satisfies the KKT conditions; the instance may be infeasible')
    _, x, lam_eq, mu = best
    return x, lam_eq, mu


def benchmark_suite(name: str, seed: int) -> list[BenchmarkCase]:
    if name == 'eq-qp':
        cases = []
        for p in (2, 3):
            for j in range(10):
                problem, reference = gen_eq_qp(p, 10, 5, seed + j)
                cases.append(BenchmarkCase(f'eq-qp-p{p}-s{seed + j}', problem, reference))
        return cases
    if name == 'ineq-qp':
        return [BenchmarkCase(f'ineq-qp-s{seed + j}', *gen_ineq_qp(2, 4, 3, seed + j)) for j in range(10)]
    if name == 'lasso':
        return [BenchmarkCase(f'lasso-s{seed + j}', *gen_lasso(20, 40, 0.1, seed + j)) for j in range(5)]
    if name == 'svm':
        return [BenchmarkCase(f'svm-n{2 + j % 3}-s{seed + j}', *gen_toy_svm(2 + j % 3, seed + j)) for j in range(4)]
    logger.error(f'Unknown suite {name!r}, expected one of {", ".join(SUITES)}')
    raise ValueError(f'unknown suite {name!r}')
