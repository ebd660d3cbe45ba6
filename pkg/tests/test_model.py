import json

import numpy as np
import pytest

from pcadmm.model import (
    BlockSpec, Box, ConfigError, ConstraintSense, DimensionError, Free, NonNeg, ProblemFormatError, Quadratic,
    SeparableProblem, SolverConfig, Variant, WeightedL1, Zero, dump_problem, dump_reference, feasibility_residual,
    lagrangian_value, load_init, load_problem, load_reference, objective_value, problem_from_dict, validate_problem,
)
from pcadmm.problems import gen_eq_qp


def _two_block(rng, m=2, n=3):
    blocks = [BlockSpec(Quadratic(np.eye(n), rng.standard_normal(n)), Free(), rng.standard_normal((m, n)))
              for _ in range(2)]
    return SeparableProblem(blocks, rng.standard_normal(m))


def test_validate_accepts_well_formed(rng):
    assert validate_problem(_two_block(rng)) == []


def test_validate_wrong_row_count():
    problem = SeparableProblem([BlockSpec(Quadratic([[1.0]], [0.0]), Free(), [[1.0]])], [1.0, 2.0])
    assert validate_problem(problem) == ['block 1: A has wrong row count']


def test_validate_box_lo_above_hi():
    block = BlockSpec(Zero(), Box([1.0], [0.0]), [[1.0]])
    violations = validate_problem(SeparableProblem([block], [0.0]))
    assert violations == ['block 1: box bounds have lo > hi']


def test_validate_asymmetric_quadratic_and_bad_orthogonal_flag():
    blocks = [
        BlockSpec(Quadratic([[1.0, 1.0], [0.0, 1.0]], [0.0, 0.0]), Free(), [[1.0, 0.0]]),
        BlockSpec(WeightedL1(1.0), Free(), [[1.0, 2.0]], orthogonal=True),
    ]
    violations = validate_problem(SeparableProblem(blocks, [0.0]))
    assert len(violations) == 2
    assert violations[0].startswith('block 1:')
    assert violations[1].startswith('block 2:')


def test_arrays_are_read_only():
    block = BlockSpec(Zero(), NonNeg(), [[1.0, 2.0]])
    with pytest.raises(ValueError):
        block.A[0, 0] = 3.0


def test_lagrangian_value(scalar_toy):
    assert lagrangian_value(scalar_toy, [[2.0]], [3.0]) == pytest.approx(-1.0)


def test_lagrangian_zero_atom_vanishes():
    problem = SeparableProblem([BlockSpec(Zero(), Free(), [[1.0, 1.0]])], [1.0])
    assert lagrangian_value(problem, [[0.25, 0.75]], [0.0]) == 0.0


def test_lagrangian_affine_in_multiplier(rng):
    problem = _two_block(rng)
    x = [rng.standard_normal(3) for _ in range(2)]
    lam1, lam2 = rng.standard_normal(2), rng.standard_normal(2)
    alpha = 0.3
    mixed = lagrangian_value(problem, x, alpha * lam1 + (1 - alpha) * lam2)
    expected = alpha * lagrangian_value(problem, x, lam1) + (1 - alpha) * lagrangian_value(problem, x, lam2)
    assert mixed == pytest.approx(expected, abs=1e-12)


def test_lagrangian_at_saddle_point_equals_objective():
    problem, reference = gen_eq_qp(2, 3, 2, seed=3)
    assert lagrangian_value(problem, reference.x, reference.lam) == pytest.approx(reference.objective, abs=1e-10)


def test_lagrangian_dimension_mismatch(scalar_toy):
    with pytest.raises(DimensionError):
        lagrangian_value(scalar_toy, [[1.0]], [1.0, 2.0])


@pytest.mark.parametrize('sense,r,lam,expected', [
    (ConstraintSense.EQUALITY, 0.0, 5.0, (0.0, 0.0)),
    (ConstraintSense.GREATER_EQUAL, 2.0, 0.0, (0.0, 0.0)),
    (ConstraintSense.GREATER_EQUAL, -0.3, 1.0, (0.3, 0.3)),
    (ConstraintSense.GREATER_EQUAL, 0.0, -0.5, (0.0, 0.5)),
])
def test_feasibility_residual(sense, r, lam, expected):
    problem = SeparableProblem([BlockSpec(Zero(), Free(), [[1.0]])], [1.0], sense)
    assert feasibility_residual(problem, [[1.0 + r]], [lam]) == pytest.approx(expected)


def test_objective_value_sums_atoms():
    blocks = [
        BlockSpec(Quadratic([[2.0]], [1.0]), Free(), [[1.0]]),
        BlockSpec(WeightedL1(0.5), Free(), [[1.0, 1.0]]),
        BlockSpec(Zero(), Free(), [[1.0]]),
    ]
    problem = SeparableProblem(blocks, [0.0])
    assert objective_value(problem, [[1.0], [-2.0, 4.0], [9.0]]) == pytest.approx(2.0 + 3.0)


@pytest.mark.parametrize('kwargs', [
    {'nu': 1.0},
    {'nu': 0.0},
    {'beta': 0.0},
    {'variant': 'jacobi'},
    {'tol': -1.0},
])
def test_solver_config_rejects(kwargs):
    with pytest.raises(ConfigError):
        SolverConfig(**kwargs)


def test_solver_config_defaults():
    config = SolverConfig(variant='dp')
    assert config.variant is Variant.DP
    assert (config.beta, config.nu, config.max_iters, config.tol, config.inner_tol) == (1.0, 0.99, 10000, 1e-6, 1e-10)


def test_nu_message():
    with pytest.raises(ConfigError, match=r'nu must lie in \(0,1\)'):
        SolverConfig(nu=1.0)


def test_load_problem(input_data_root):
    problem = load_problem(input_data_root / 'mixed_atoms.json')
    assert (problem.p, problem.m, problem.sense) == (3, 2, ConstraintSense.EQUALITY)
    assert isinstance(problem.blocks[0].theta, Quadratic)
    assert isinstance(problem.blocks[0].set, Free)
    assert isinstance(problem.blocks[1].theta, WeightedL1) and problem.blocks[1].theta.tau == 0.5
    assert isinstance(problem.blocks[1].set, Box) and problem.blocks[1].orthogonal
    assert isinstance(problem.blocks[2].theta, Zero) and isinstance(problem.blocks[2].set, NonNeg)
    assert validate_problem(problem) == []


@pytest.mark.parametrize('file_name,key', [
    ('missing_b.json', 'b'),
    ('unknown_theta.json', 'blocks[0].theta.type'),
    ('bad_rows.json', 'blocks[0].A'),
])
def test_load_problem_names_offending_key(input_data_root, file_name, key):
    with pytest.raises(ProblemFormatError) as e:
        load_problem(input_data_root / file_name)
    assert e.value.key == key
    assert key in str(e.value)


def test_problem_from_dict_bad_sense():
    with pytest.raises(ProblemFormatError, match='sense'):
        problem_from_dict({'m': 1, 'sense': 'le', 'b': [0.0], 'blocks': []})


def test_problem_json_round_trip(input_data_root, tmp_path):
    problem = load_problem(input_data_root / 'mixed_atoms.json')
    dump_problem(problem, tmp_path / 'copy.json')
    copy = load_problem(tmp_path / 'copy.json')

    assert json.loads((tmp_path / 'copy.json').read_text('utf-8'))['sense'] == 'eq'
    assert copy.p == problem.p and copy.m == problem.m
    for blk, blk_copy in zip(problem.blocks, copy.blocks):
        assert type(blk.theta) is type(blk_copy.theta)
        assert type(blk.set) is type(blk_copy.set)
        assert blk.orthogonal == blk_copy.orthogonal
        np.testing.assert_array_equal(blk.A, blk_copy.A)


def test_reference_and_init(input_data_root, tmp_path):
    problem = load_problem(input_data_root / 'eq_toy.json')
    reference = load_reference(input_data_root / 'eq_toy.reference.json', problem)
    np.testing.assert_array_equal(reference.lam, [1.0])
    assert reference.objective == 0.5

    dump_reference(reference, tmp_path / 'ref.json')
    again = load_reference(tmp_path / 'ref.json', problem)
    np.testing.assert_array_equal(again.a[0], reference.a[0])

    x0, lam0 = load_init(input_data_root / 'eq_toy.init.json', problem)
    np.testing.assert_array_equal(x0[0], [1.0])
    np.testing.assert_array_equal(lam0, [1.0])


def test_reference_wrong_length(input_data_root, tmp_path):
    problem = load_problem(input_data_root / 'two_block.json')
    (tmp_path / 'ref.json').write_text(json.dumps({'a': [[0.5]], 'lambda': [0.5]}), 'utf-8')
    with pytest.raises(ProblemFormatError):
        load_reference(tmp_path / 'ref.json', problem)
