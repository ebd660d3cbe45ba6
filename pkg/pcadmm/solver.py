import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple

import numpy as np
from loguru import logger

from pcadmm import corrector, predictor
from pcadmm.matrices import build_H, framework_matrices, xi_from_aggregates
from pcadmm.model import (
    InvalidProblem, IterateState, PcadmmError, PredictorState, SaddlePoint, SeparableProblem, SolverConfig,
    feasibility_residual, objective_value, validate_problem,
)
from pcadmm.prox import NonConvergence, SingularSystem

CSV_COLUMNS = ('iter', 'primal_res', 'compl_res', 'pred_gap', 'dist_H', 'objective')

# contraction slack: 1e-8 (1 + ||xi^k - xi*||_H^2) + SLACK_FACTOR * inner_tol
RELATIVE_SLACK = 1e-8
SLACK_FACTOR = 100.0


class MissingReference(PcadmmError):
    def __init__(self, message="contraction check needs a reference solution and recorded snapshots"):
        super().__init__(message)


class StopKind(str, Enum):
    CONVERGED = 'converged'
    MAX_ITERS = 'max_iters'
    SUBPROBLEM_FAILURE = 'subproblem_failure'


@dataclass(frozen=True)
class StopReason:
    kind: StopKind
    detail: str = ''

    def __str__(self):
        return f'{self.kind.value} ({self.detail})' if self.detail else self.kind.value


@dataclass(frozen=True, eq=False)
class IterationRecord:
    iter: int
    primal_res: float
    compl_res: float
    pred_gap: float
    dist_H: float | None
    objective: float
    xi: np.ndarray | None = None
    xi_tilde: np.ndarray | None = None

    def row(self):
        return [self.iter, self.primal_res, self.compl_res, self.pred_gap,
                '' if self.dist_H is None else self.dist_H, self.objective]


class RunLog:
    def __init__(self, records=None):
        self.records: list[IterationRecord] = list(records or [])

    def append(self, record: IterationRecord):
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, item):
        return self.records[item]

    def column(self, name):
        return [getattr(r, name) for r in self.records]

    def write_csv(self, path: str | Path):
        with Path(path).open('w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(CSV_COLUMNS)
            for record in self.records:
                writer.writerow(record.row())

    @classmethod
    def read_csv(cls, path: str | Path) -> 'RunLog':
        with Path(path).open(newline='', encoding='utf-8') as f:
            reader = csv.reader(f)
            header = next(reader)
            if tuple(header) != CSV_COLUMNS:
                raise ValueError(f'unexpected CSV header {header}')
            records = [
                IterationRecord(
                    iter=int(row[0]),
                    primal_res=float(row[1]),
                    compl_res=float(row[2]),
                    pred_gap=float(row[3]),
                    dist_H=float(row[4]) if row[4] else None,
                    objective=float(row[5]),
                )
                for row in reader
            ]
        return cls(records)


class RunResult(NamedTuple):
    solution: PredictorState | None
    state: IterateState
    log: RunLog
    reason: StopReason


@dataclass(frozen=True)
class ContractionViolation:
    iter: int
    lhs: float
    rhs: float
    slack: float

    def __str__(self):
        return f'iteration {self.iter}: {self.lhs:.6e} > {self.rhs:.6e} + {self.slack:.1e}'


def initial_state(problem: SeparableProblem, init=None) -> IterateState:
    """a^0 = A_i x_i^0 and lambda^0; zeros unless init = (x0 blocks, lambda0) is given."""
    if init is None:
        return IterateState([np.zeros(problem.m) for _ in problem.blocks], np.zeros(problem.m))
    x0, lam0 = init
    return IterateState(problem.aggregates(x0), np.asarray(lam0, dtype=np.float64))


def run(problem: SeparableProblem,
        config: SolverConfig = SolverConfig(),
        init=None,
        reference: SaddlePoint | None = None,
        ) -> RunResult:
    """
    Alternate prediction and correction until the predictor is optimal to `config.tol`.

    The reported solution is the last predictor: x~_i lies in X_i, while corrected
    primal points are never formed (only the aggregates A_i x_i are corrected).
    """
    violations = validate_problem(problem)
    if violations:
        raise InvalidProblem(violations)

    variant, beta = config.variant, config.beta
    state = initial_state(problem, init)

    H = xi_star = None
    if reference is not None:
        H = build_H(variant, problem.p, problem.m, config.nu)
        _check_weight(H)
        xi_star = xi_from_aggregates(reference.a, reference.lam, beta)

    logger.info(f'Solving p={problem.p}, m={problem.m}, sense={problem.sense.value} '
                f'with {variant.value} (beta={beta}, nu={config.nu})')

    log = RunLog()
    pred = None
    reason = StopReason(StopKind.MAX_ITERS)
    for k in range(config.max_iters):
        try:
            pred = predictor.predict(variant, problem, state, beta, config.inner_tol,
                                     warm=pred, inner_max_iters=config.inner_max_iters)
        except (SingularSystem, NonConvergence) as e:
            logger.error(f'Subproblem failure at iteration {k}: {e}')
            reason = StopReason(StopKind.SUBPROBLEM_FAILURE, str(e))
            break

        xi = xi_from_aggregates(state.a, state.lam, beta)
        xi_tilde = xi_from_aggregates(pred.a_tilde, pred.lambda_tilde, beta)
        primal_res, compl_res = feasibility_residual(problem, pred.a_tilde, pred.lambda_tilde)
        pred_gap = float(np.linalg.norm(xi - xi_tilde))
        record = IterationRecord(
            iter=k,
            primal_res=primal_res,
            compl_res=compl_res,
            pred_gap=pred_gap,
            dist_H=None if H is None else _weighted_norm(xi - xi_star, H),
            objective=objective_value(problem, pred.x_tilde),
            xi=xi if config.record_snapshots else None,
            xi_tilde=xi_tilde if config.record_snapshots else None,
        )
        log.append(record)

        if config.log_every and k % config.log_every == 0:
            logger.debug(f'iter {k}: primal_res={primal_res:.3e} compl_res={compl_res:.3e} pred_gap={pred_gap:.3e}')

        if max(primal_res, compl_res, pred_gap) <= config.tol:
            reason = StopReason(StopKind.CONVERGED)
            break

        state = corrector.correct(variant, state, pred, config.nu, beta)

    logger.info(f'Stopped after {len(log)} iterations: {reason}')
    return RunResult(pred, state, log, reason)


def contraction_check(log: RunLog,
                      problem: SeparableProblem,
                      config: SolverConfig,
                      reference: SaddlePoint | None) -> list[ContractionViolation]:
    """
    Flag iterations where ||xi^{k+1} - xi*||_H^2 > ||xi^k - xi*||_H^2 - ||xi^k - xi~^k||_G^2 + slack.
    """
    if reference is None:
        raise MissingReference('contraction check needs a reference solution')
    if any(r.xi is None or r.xi_tilde is None for r in log):
        raise MissingReference('run the solver with record_snapshots=True')

    fm = framework_matrices(config.variant, problem.p, problem.m, config.nu)
    xi_star = xi_from_aggregates(reference.a, reference.lam, config.beta)

    violations = []
    for k in range(len(log) - 1):
        e_k = log[k].xi - xi_star
        e_next = log[k + 1].xi - xi_star
        step = log[k].xi - log[k].xi_tilde
        dist_k = float(e_k @ fm.H @ e_k)
        lhs = float(e_next @ fm.H @ e_next)
        rhs = dist_k - float(step @ fm.G @ step)
        slack = RELATIVE_SLACK * (1 + dist_k) + SLACK_FACTOR * config.inner_tol
        if lhs > rhs + slack:
            violations.append(ContractionViolation(k, lhs, rhs, slack))

    if violations:
        logger.warning(f'{len(violations)} contraction violations, first at iteration {violations[0].iter}')
    return violations


def xi_distance(a, lam, ref_a, ref_lam, W, beta) -> float:
    """sqrt((xi - xi*)' W (xi - xi*)) in xi = (sqrt(beta) a_i, lambda / sqrt(beta)) coordinates."""
    W = np.asarray(W, dtype=np.float64)
    _check_weight(W)
    diff = xi_from_aggregates(a, lam, beta) - xi_from_aggregates(ref_a, ref_lam, beta)
    if diff.shape[0] != W.shape[0]:
        raise ValueError(f'weight matrix has size {W.shape[0]}, xi has {diff.shape[0]} entries')
    return _weighted_norm(diff, W)


def _check_weight(W):
    if W.ndim != 2 or W.shape[0] != W.shape[1] or not np.allclose(W, W.T, rtol=0, atol=1e-12):
        raise ValueError('weight matrix must be square and symmetric')
    try:
        np.linalg.cholesky(W)
    except np.linalg.LinAlgError:
        raise ValueError('weight matrix must be positive definite')


def _weighted_norm(d, W):
    return float(np.sqrt(max(float(d @ W @ d), 0.0)))
