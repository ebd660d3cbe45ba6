import numpy as np
import pytest

from pcadmm import corrector
from pcadmm.matrices import build_H
from pcadmm.model import (
    BlockSpec, Free, InvalidProblem, IterateState, Quadratic, SeparableProblem, SolverConfig, Variant,
)
from pcadmm.problems import benchmark_suite, gen_eq_qp, gen_ineq_qp, gen_lasso
from pcadmm.solver import (
    CSV_COLUMNS, MissingReference, RunLog, StopKind, contraction_check, initial_state, run, xi_distance,
)


@pytest.fixture(scope='module')
def eq_suite():
    return benchmark_suite('eq-qp', 0)


@pytest.mark.parametrize('variant', list(Variant))
def test_scalar_equality(scalar_toy, variant):
    result = run(scalar_toy, SolverConfig(variant=variant))
    assert result.reason.kind is StopKind.CONVERGED
    np.testing.assert_allclose(result.solution.x_tilde[0], [1.0], atol=1e-5)
    np.testing.assert_allclose(result.solution.lambda_tilde, [1.0], atol=1e-5)
    assert result.log[-1].primal_res <= 1e-6


@pytest.mark.parametrize('variant', list(Variant))
def test_scalar_inactive_inequality(scalar_ge_toy, variant):
    result = run(scalar_ge_toy, SolverConfig(variant=variant))
    assert result.reason.kind is StopKind.CONVERGED
    np.testing.assert_allclose(result.solution.x_tilde[0], [2.0], atol=1e-5)
    np.testing.assert_allclose(result.solution.lambda_tilde, [0.0], atol=1e-5)
    assert np.all(result.solution.lambda_tilde >= 0)


@pytest.mark.parametrize('variant', list(Variant))
def test_saddle_point_initialization(scalar_toy, variant):
    result = run(scalar_toy, SolverConfig(variant=variant), init=([[1.0]], [1.0]))
    assert result.reason.kind is StopKind.CONVERGED
    assert len(result.log) == 1
    assert result.log[0].pred_gap <= 10 * 1e-10


def test_max_iters(scalar_toy):
    result = run(scalar_toy, SolverConfig(max_iters=3, tol=0.0))
    assert result.reason.kind is StopKind.MAX_ITERS
    assert len(result.log) == 3
    assert result.log.column('iter') == [0, 1, 2]


def test_subproblem_failure_keeps_partial_log():
    blocks = [BlockSpec(Quadratic([[0.0, 0.0], [0.0, 0.0]], [0.0, 0.0]), Free(), [[1.0, 1.0]])]
    result = run(SeparableProblem(blocks, [1.0]), SolverConfig())
    assert result.reason.kind is StopKind.SUBPROBLEM_FAILURE
    assert 'block 1' in result.reason.detail
    assert len(result.log) == 0


def test_invalid_problem_rejected():
    problem = SeparableProblem([BlockSpec(Quadratic([[1.0]], [0.0]), Free(), [[1.0]])], [1.0, 2.0])
    with pytest.raises(InvalidProblem, match='wrong row count'):
        run(problem)


def test_initial_state_from_init():
    problem, _ = gen_eq_qp(2, 2, 1, seed=0)
    state = initial_state(problem, ([[1.0, 0.0], [0.0, 1.0]], [3.0]))
    np.testing.assert_allclose(state.a[0], problem.blocks[0].A[:, 0])
    np.testing.assert_array_equal(state.lam, [3.0])


@pytest.mark.parametrize('variant', list(Variant))
def test_contraction_on_equality_suite(eq_suite, variant):
    for case in eq_suite:
        config = SolverConfig(variant=variant, record_snapshots=True)
        result = run(case.problem, config, reference=case.reference)
        assert result.reason.kind is StopKind.CONVERGED, case.label
        assert contraction_check(result.log, case.problem, config, case.reference) == [], case.label

        dist = result.log.column('dist_H')
        slack = [1e-8 * (1 + d ** 2) + 100 * config.inner_tol for d in dist]
        assert all(dist[k + 1] ** 2 <= dist[k] ** 2 + slack[k] for k in range(len(dist) - 1)), case.label

        pred_gap = result.log.column('pred_gap')
        assert pred_gap[-1] <= config.tol and pred_gap[-1] < pred_gap[0]


@pytest.mark.parametrize('variant', list(Variant))
def test_objective_matches_oracle(eq_suite, variant):
    for case in eq_suite:
        result = run(case.problem, SolverConfig(variant=variant, tol=1e-9))
        last = result.log[-1]
        assert last.primal_res <= 1e-6
        oracle = case.reference.objective
        assert abs(last.objective - oracle) <= 1e-6 * (1 + abs(oracle)), case.label


def test_variants_agree():
    problem, _ = gen_eq_qp(3, 4, 3, seed=21)
    pd = run(problem, SolverConfig(variant='pd', tol=1e-9)).log[-1].objective
    dp = run(problem, SolverConfig(variant='dp', tol=1e-9)).log[-1].objective
    assert pd == pytest.approx(dp, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize('variant', list(Variant))
@pytest.mark.parametrize('seed', range(10))
def test_inequality_kkt(variant, seed):
    problem, reference = gen_ineq_qp(2, 4, 3, seed)
    config = SolverConfig(variant=variant, record_snapshots=True)
    result = run(problem, config, reference=reference)
    assert result.reason.kind is StopKind.CONVERGED

    pred = result.solution
    r = problem.residual(pred.a_tilde)
    assert np.all(pred.lambda_tilde >= 0)
    assert abs(pred.lambda_tilde @ r) <= 1e-6
    assert r.min() >= -1e-6
    assert contraction_check(result.log, problem, config, reference) == []


@pytest.mark.parametrize('variant', list(Variant))
def test_lasso_matches_proximal_gradient(variant):
    for seed in range(5):
        problem, reference = gen_lasso(20, 40, 0.1, seed)
        result = run(problem, SolverConfig(variant=variant, tol=1e-9, max_iters=20000))
        assert result.reason.kind is StopKind.CONVERGED
        objective = result.log[-1].objective
        assert reference.objective <= objective + 1e-8
        assert objective == pytest.approx(reference.objective, rel=1e-6)


@pytest.mark.parametrize('suite', ['eq-qp', 'ineq-qp', 'lasso', 'svm'])
@pytest.mark.parametrize('variant', list(Variant))
def test_fixed_point_at_reference(suite, variant):
    for case in benchmark_suite(suite, 3):
        if case.reference is None or case.reference.x is None:
            continue
        result = run(case.problem, SolverConfig(variant=variant, max_iters=1),
                     init=(case.reference.x, case.reference.lam))
        assert result.log[0].pred_gap <= 10 * 1e-10, case.label


def test_mutated_correction_breaks_contraction(monkeypatch, eq_suite):
    def flipped(state, pred, nu, beta):
        d = [a - a_t for a, a_t in zip(state.a, pred.a_tilde)]
        lam = state.lam - nu * beta * d[0] - (state.lam - pred.lambda_tilde)
        return IterateState(corrector._correct_aggregates(state.a, np.stack(d), nu), lam)

    monkeypatch.setattr(corrector, 'correct_pd', flipped)
    violations = 0
    for case in eq_suite:
        config = SolverConfig(variant='pd', max_iters=200, record_snapshots=True)
        result = run(case.problem, config, reference=case.reference)
        violations += len(contraction_check(result.log, case.problem, config, case.reference))
    assert violations > 0


def test_contraction_needs_reference_and_snapshots(scalar_toy):
    config = SolverConfig()
    result = run(scalar_toy, config)
    with pytest.raises(MissingReference):
        contraction_check(result.log, scalar_toy, config, None)
    _, reference = gen_eq_qp(1, 1, 1, seed=0)
    with pytest.raises(MissingReference):
        contraction_check(result.log, scalar_toy, config, reference)


def test_xi_distance():
    a, lam = [np.zeros(1), np.zeros(1)], np.zeros(1)
    assert xi_distance(a, lam, a, lam, np.eye(3), 1.0) == 0.0
    assert xi_distance([[3.0], [0.0]], [4.0], a, lam, np.eye(3), 1.0) == pytest.approx(5.0)
    H = build_H(Variant.PD, 2, 1, 0.5)
    assert xi_distance([[1.0], [0.0]], [0.0], a, lam, H, 1.0) == pytest.approx(np.sqrt(3.0))


def test_xi_distance_rejects_indefinite_weight():
    a, lam = [np.zeros(1)], np.zeros(1)
    with pytest.raises(ValueError):
        xi_distance(a, lam, a, lam, np.diag([1.0, -1.0]), 1.0)


def test_csv_round_trip(tmp_path):
    problem, reference = gen_eq_qp(2, 3, 2, seed=8)
    config = SolverConfig(variant='dp')
    first = run(problem, config, reference=reference).log
    second = run(problem, config, reference=reference).log
    first.write_csv(tmp_path / 'first.csv')
    second.write_csv(tmp_path / 'second.csv')

    assert (tmp_path / 'first.csv').read_bytes() == (tmp_path / 'second.csv').read_bytes()
    header = (tmp_path / 'first.csv').read_text('utf-8').splitlines()[0]
    assert tuple(header.split(',')) == CSV_COLUMNS

    parsed = RunLog.read_csv(tmp_path / 'first.csv')
    assert len(parsed) == len(first)
    iters = parsed.column('iter')
    assert iters == sorted(iters) and iters[0] == 0
    assert parsed[-1].dist_H == pytest.approx(first[-1].dist_H)


def test_csv_without_reference_has_empty_distance(tmp_path, scalar_toy):
    run(scalar_toy).log.write_csv(tmp_path / 'log.csv')
    rows = (tmp_path / 'log.csv').read_text('utf-8').splitlines()[1:]
    assert rows and all(row.split(',')[4] == '' for row in rows)
    assert RunLog.read_csv(tmp_path / 'log.csv')[0].dist_H is None
