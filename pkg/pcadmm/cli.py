import sys
import warnings
from functools import wraps
from itertools import product
from pathlib import Path

from loguru import logger
from tqdm import TqdmExperimentalWarning
warnings.filterwarnings("ignore", category=TqdmExperimentalWarning)
from tqdm.autonotebook import tqdm

from pcadmm.matrices import verify_framework
from pcadmm.model import (
    PcadmmError, SolverConfig, Variant, dump_problem, dump_reference, load_init, load_problem, load_reference,
)
from pcadmm.problems import SUITES, benchmark_suite
from pcadmm.solver import StopKind, contraction_check, run

DEFAULT_P = (1, 2, 3, 5)
DEFAULT_M = (1, 2)
DEFAULT_NUS = (0.01, 0.25, 0.5, 0.75, 0.99)

EXIT_CODES = {StopKind.CONVERGED: 0, StopKind.MAX_ITERS: 2, StopKind.SUBPROBLEM_FAILURE: 1}

SOLVE_USAGE = ('usage: pcadmm solve --problem <path.json> [--variant pd|dp] [--beta B] [--nu NU] [--tol T] '
               '[--max-iters N] [--inner-tol T] [--log <path.csv>] [--reference <path.json>] [--init <path.json>] '
               '[--record-snapshots]')


def cmd_solve(problem: str | Path = None,
              variant: str = 'pd',
              beta: float = 1.0,
              nu: float = 0.99,
              tol: float = 1e-6,
              max_iters: int = 10000,
              inner_tol: float = 1e-10,
              log: str | Path = None,
              reference: str | Path = None,
              init: str | Path = None,
              record_snapshots: bool = False,
              ):
    """
    Solve a problem given as JSON and print a key=value summary.

    Args:
        problem: Path to the problem JSON.
        variant: pd (primal-dual) or dp (dual-primal).
        beta: Penalty parameter.
        nu: Correction factor in (0, 1).
        tol: Stopping tolerance on primal residual, complementarity and prediction gap.
        max_iters: Iteration cap.
        inner_tol: Accuracy of iterative block solvers.
        log: Optional path of the per-iteration CSV log.
        reference: Optional reference solution JSON; enables dist_H logging.
        init: Optional initial point JSON with "x" (per block) and "lambda".
        record_snapshots: Keep xi snapshots and run the contraction check against the reference.

    Returns 0 when converged, 2 when the iteration cap was hit and 1 on errors.
    """
    if problem is None:
        logger.error(SOLVE_USAGE)
        return 1

    try:
        config = SolverConfig(
            variant=variant,
            beta=float(beta),
            nu=float(nu),
            max_iters=int(max_iters),
            tol=float(tol),
            inner_tol=float(inner_tol),
            record_snapshots=bool(record_snapshots),
        )
        prob = load_problem(problem)
        ref = load_reference(reference, prob) if reference is not None else None
        x0 = load_init(init, prob) if init is not None else None
        result = run(prob, config, init=x0, reference=ref)
    except (PcadmmError, OSError, ValueError) as e:
        logger.error(f'{e}')
        return 1

    summary = {'iters': len(result.log), 'reason': result.reason.kind.value}
    if len(result.log):
        last = result.log[-1]
        summary = {
            'objective': last.objective,
            'primal_res': last.primal_res,
            'compl_res': last.compl_res,
            'pred_gap': last.pred_gap,
            **summary,
        }
    for key, value in summary.items():
        print(f'{key}={value}')

    if record_snapshots and ref is not None:
        print(f'violations={len(contraction_check(result.log, prob, config, ref))}')

    if log is not None:
        try:
            result.log.write_csv(log)
        except OSError as e:
            logger.error(f'Could not write log {log}: {e}')
            return 1

    return EXIT_CODES[result.reason.kind]


def cmd_verify_matrices(p_max: int = None, m_max: int = None, nu_list=None):
    """
    Check HM = Q and the positive definiteness of H, G and Q' + Q over a parameter sweep.

    Args:
        p_max: Largest block count (default sweep p in 1, 2, 3, 5).
        m_max: Largest constraint dimension (default sweep m in 1, 2).
        nu_list: Correction factors, comma separated (default 0.01,0.25,0.5,0.75,0.99).

    Returns 0 iff every case passes.
    """
    try:
        nus = _parse_nu_list(nu_list)
        cases = list(product(Variant, _sweep(DEFAULT_P, p_max), _sweep(DEFAULT_M, m_max), nus))
        reports = [verify_framework(*case) for case in tqdm(cases, desc="Verifying matrices...", unit="cases")]
    except (PcadmmError, ValueError) as e:
        logger.error(f'{e}')
        return 1

    header = f'{"variant":<8}{"p":>3}{"m":>3}{"nu":>7}{"hm_eq_q_maxerr":>16}{"h_min_eig":>13}{"g_min_eig":>13}' \
             f'{"qtq_min_eig":>13}  status'
    print(header)
    for r in reports:
        print(f'{r.variant.value:<8}{r.p:>3}{r.m:>3}{r.nu:>7.3g}{r.hm_eq_q_maxerr:>16.3e}{r.h_min_eig:>13.6g}'
              f'{r.g_min_eig:>13.6g}{r.qtq_min_eig:>13.6g}  {"PASS" if r.passed else "FAIL"}')

    failed = sum(not r.passed for r in reports)
    logger.info(f'Verified {len(reports)} cases, {failed} failed')
    return 0 if failed == 0 else 1


def cmd_bench(suite: str = None,
              seed: int = 0,
              beta: float = 1.0,
              nu: float = 0.99,
              tol: float = 1e-6,
              max_iters: int = 10000,
              log_dir: str | Path = None,
              ):
    """
    Run both variants on a benchmark suite and check contraction against the oracle references.

    Args:
        suite: One of eq-qp, ineq-qp, lasso, svm.
        seed: Seed of the first instance; instances use consecutive seeds.
        beta: Penalty parameter.
        nu: Correction factor in (0, 1).
        tol: Stopping tolerance.
        max_iters: Iteration cap per run.
        log_dir: Optional directory receiving one CSV log per run.

    Returns 0 iff every run converged without contraction violations.
    """
    if suite not in SUITES:
        logger.error(f'Unknown suite {suite!r}, expected one of {", ".join(SUITES)}')
        return 1

    try:
        cases = benchmark_suite(suite, int(seed))
    except (PcadmmError, ValueError) as e:
        logger.error(f'Could not generate suite {suite}: {e}')
        return 1

    if log_dir is not None:
        log_dir = Path(log_dir).expanduser().absolute()
        try:
            log_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            logger.error(f'Could not create log directory {log_dir}: {e}')
            return 1

    num_runs = num_converged = num_violations = 0
    for case in tqdm(cases, desc="Running benchmark...", unit="cases"):
        for variant in Variant:
            num_runs += 1
            try:
                config = SolverConfig(variant, float(beta), float(nu), int(max_iters), float(tol),
                                      record_snapshots=case.reference is not None)
                result = run(case.problem, config, reference=case.reference)
                violations = [] if case.reference is None else \
                    contraction_check(result.log, case.problem, config, case.reference)
            except Exception:
                logger.exception(f'Error while solving {case.label} with {variant.value}')
                continue

            if result.reason.kind is StopKind.CONVERGED:
                num_converged += 1
            else:
                logger.warning(f'{case.label} ({variant.value}) stopped with {result.reason}')
            num_violations += len(violations)

            line = f'case={case.label} variant={variant.value} iters={len(result.log)} reason={result.reason.kind.value}'
            if len(result.log):
                last = result.log[-1]
                line += f' primal_res={last.primal_res:.3e} compl_res={last.compl_res:.3e} pred_gap={last.pred_gap:.3e}'
                if case.reference is not None and case.reference.objective is not None:
                    line += f' objective_gap={abs(last.objective - case.reference.objective):.3e}'
            print(f'{line} violations={len(violations)}')

            if log_dir is not None:
                try:
                    result.log.write_csv(log_dir / f'{case.label}-{variant.value}.csv')
                except OSError as e:
                    logger.error(f'Could not write log for {case.label} ({variant.value}): {e}')
                    return 1

    print(f'runs={num_runs} converged={num_converged} violations={num_violations}')
    return 0 if num_converged == num_runs and num_violations == 0 else 1


def cmd_generate(suite: str = None, seed: int = 0, out: str | Path = '.'):
    """
    Export a benchmark suite as problem and reference JSON files.

    Args:
        suite: One of eq-qp, ineq-qp, lasso, svm.
        seed: Seed of the first instance.
        out: Output directory; receives <label>.json and <label>.reference.json.
    """
    if suite not in SUITES:
        logger.error(f'Unknown suite {suite!r}, expected one of {", ".join(SUITES)}')
        return 1

    out = Path(out).expanduser().absolute()
    try:
        out.mkdir(parents=True, exist_ok=True)
        cases = benchmark_suite(suite, int(seed))
        for case in cases:
            dump_problem(case.problem, out / f'{case.label}.json')
            if case.reference is not None:
                dump_reference(case.reference, out / f'{case.label}.reference.json')
    except (PcadmmError, OSError, ValueError) as e:
        logger.error(f'{e}')
        return 1

    logger.info(f'Wrote {len(cases)} problems to {out}')
    return 0


def _sweep(defaults, limit):
    if limit is None:
        return list(defaults)
    limit = int(limit)
    return sorted({v for v in defaults if v <= limit} | {limit})


def _parse_nu_list(nu_list):
    if nu_list is None:
        return list(DEFAULT_NUS)
    if isinstance(nu_list, (int, float)):
        return [float(nu_list)]
    if isinstance(nu_list, str):
        nu_list = [item for item in nu_list.split(',') if item.strip()]
    return [float(nu) for nu in nu_list]


def _exits(command):
    @wraps(command)
    def wrapper(*args, **kwargs):
        sys.exit(command(*args, **kwargs))
    return wrapper


COMMANDS = {
    'solve': _exits(cmd_solve),
    'verify-matrices': _exits(cmd_verify_matrices),
    'bench': _exits(cmd_bench),
    'generate': _exits(cmd_generate),
}
