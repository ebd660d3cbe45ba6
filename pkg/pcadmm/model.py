import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np

from pcadmm.utils import NumpyEncoder, frozen_array


class PcadmmError(Exception):
    def __init__(self, message="pcadmm failure"):
        super().__init__(message)


class DimensionError(PcadmmError, ValueError):
    def __init__(self, message="Dimension mismatch"):
        super().__init__(message)


class ProblemFormatError(PcadmmError):
    def __init__(self, key, reason="missing or malformed"):
        self.key = key
        self.reason = reason
        super().__init__(f'{key}: {reason}')


class InvalidProblem(PcadmmError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__('invalid problem: ' + '; '.join(self.violations))


class ConfigError(PcadmmError, ValueError):
    def __init__(self, message="Invalid solver configuration"):
        super().__init__(message)


class ConstraintSense(str, Enum):
    EQUALITY = 'eq'
    GREATER_EQUAL = 'ge'

    def project_multiplier(self, lam: np.ndarray) -> np.ndarray:
        """Projection onto the multiplier set: all of R^m, or the nonnegative orthant."""
        if self is ConstraintSense.GREATER_EQUAL:
            return np.maximum(lam, 0.0)
        return lam


class Variant(str, Enum):
    PD = 'pd'
    DP = 'dp'


# objective atoms

@dataclass(frozen=True, eq=False)
class Quadratic:
    """theta(x) = 1/2 x'Hx + c'x with H symmetric positive semidefinite."""
    H: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'H', frozen_array(self.H, ndim=2))
        object.__setattr__(self, 'c', frozen_array(self.c))

    def value(self, x):
        return float(0.5 * x @ self.H @ x + self.c @ x)

    def gradient(self, x):
        return self.H @ x + self.c


@dataclass(frozen=True, eq=False)
class WeightedL1:
    tau: float

    def value(self, x):
        return float(self.tau * np.abs(x).sum())


@dataclass(frozen=True, eq=False)
class Zero:
    def value(self, x):
        return 0.0


@dataclass(frozen=True, eq=False)
class Custom:
    """
    User supplied atom.

    `value(x)` evaluates theta; `solve(A, beta, v, x0)` must return
    argmin theta(x) + beta/2 ||Ax - v||^2 over the block's set, starting from x0.
    """
    value: Callable[[np.ndarray], float]
    solve: Callable[[np.ndarray, float, np.ndarray, np.ndarray], np.ndarray]


ThetaAtom = Quadratic | WeightedL1 | Zero | Custom


# block sets

@dataclass(frozen=True, eq=False)
class Free:
    pass


@dataclass(frozen=True, eq=False)
class NonNeg:
    pass


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'lo', frozen_array(self.lo))
        object.__setattr__(self, 'hi', frozen_array(self.hi))


SetSpec = Free | NonNeg | Box


@dataclass(frozen=True, eq=False)
class BlockSpec:
    theta: ThetaAtom
    set: SetSpec
    A: np.ndarray
    orthogonal: bool = False  # A'A = cI for some c > 0, enables the closed-form prox

    def __post_init__(self):
        object.__setattr__(self, 'A', frozen_array(self.A, ndim=2))

    @property
    def n(self):
        return self.A.shape[1]


@dataclass(frozen=True, eq=False)
class SeparableProblem:
    blocks: tuple[BlockSpec, ...]
    b: np.ndarray
    sense: ConstraintSense = ConstraintSense.EQUALITY
    m: int = field(default=-1)

    def __post_init__(self):
        object.__setattr__(self, 'blocks', tuple(self.blocks))
        object.__setattr__(self, 'b', frozen_array(self.b))
        object.__setattr__(self, 'sense', ConstraintSense(self.sense))
        if self.m < 0:
            object.__setattr__(self, 'm', self.b.shape[0])

    @property
    def p(self):
        return len(self.blocks)

    def residual(self, a) -> np.ndarray:
        """sum_i a_i - b for aggregates a_i = A_i x_i."""
        if len(a) != self.p:
            raise DimensionError(f'expected {self.p} aggregates, got {len(a)}')
        r = -np.asarray(self.b, dtype=float)
        for i, a_i in enumerate(a):
            a_i = np.asarray(a_i, dtype=float)
            if a_i.shape != (self.m,):
                raise DimensionError(f'aggregate {i + 1} has shape {a_i.shape}, expected ({self.m},)')
            r = r + a_i
        return r

    def aggregates(self, x) -> list[np.ndarray]:
        if len(x) != self.p:
            raise DimensionError(f'expected {self.p} blocks, got {len(x)}')
        out = []
        for i, (blk, x_i) in enumerate(zip(self.blocks, x)):
            x_i = np.asarray(x_i, dtype=float)
            if x_i.shape != (blk.n,):
                raise DimensionError(f'block {i + 1}: x has shape {x_i.shape}, expected ({blk.n},)')
            out.append(blk.A @ x_i)
        return out


@dataclass(frozen=True, eq=False)
class IterateState:
    """The recursion state (A_1 x_1^k, ..., A_p x_p^k, lambda^k); primal points are not kept."""
    a: tuple[np.ndarray, ...]
    lam: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'a', tuple(frozen_array(a_i) for a_i in self.a))
        object.__setattr__(self, 'lam', frozen_array(self.lam))


@dataclass(frozen=True, eq=False)
class PredictorState:
    x_tilde: tuple[np.ndarray, ...]
    a_tilde: tuple[np.ndarray, ...]
    lambda_tilde: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'x_tilde', tuple(frozen_array(x) for x in self.x_tilde))
        object.__setattr__(self, 'a_tilde', tuple(frozen_array(a) for a in self.a_tilde))
        object.__setattr__(self, 'lambda_tilde', frozen_array(self.lambda_tilde))


@dataclass(frozen=True)
class SolverConfig:
    variant: Variant = Variant.PD
    beta: float = 1.0
    nu: float = 0.99
    max_iters: int = 10000
    tol: float = 1e-6
    inner_tol: float = 1e-10
    inner_max_iters: int = 50000
    record_snapshots: bool = False
    log_every: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, 'variant', Variant(self.variant))
        except ValueError:
            raise ConfigError(f'unknown variant {self.variant!r}, expected pd or dp')
        if not self.beta > 0:
            raise ConfigError('beta must be positive')
        if not 0 < self.nu < 1:
            raise ConfigError('nu must lie in (0,1)')
        if self.max_iters < 0:
            raise ConfigError('max_iters must be nonnegative')
        if self.tol < 0 or self.inner_tol < 0:
            raise ConfigError('tolerances must be nonnegative')


@dataclass(frozen=True, eq=False)
class SaddlePoint:
    """Reference solution (x*, A_i x_i*, lambda*) produced by the benchmark oracles."""
    x: tuple[np.ndarray, ...] | None
    a: tuple[np.ndarray, ...]
    lam: np.ndarray
    objective: float | None = None

    def __post_init__(self):
        if self.x is not None:
            object.__setattr__(self, 'x', tuple(frozen_array(x_i) for x_i in self.x))
        object.__setattr__(self, 'a', tuple(frozen_array(a_i) for a_i in self.a))
        object.__setattr__(self, 'lam', frozen_array(self.lam))

    def state(self) -> IterateState:
        return IterateState(self.a, self.lam)


def validate_problem(problem: SeparableProblem) -> list[str]:
    violations = []
    m = problem.m
    if problem.p < 1:
        violations.append('problem has no blocks')
    if problem.b.shape != (m,):
        violations.append(f'b has length {problem.b.size}, expected {m}')

    for i, blk in enumerate(problem.blocks, start=1):
        A = blk.A
        if A.shape[0] != m:
            violations.append(f'block {i}: A has wrong row count')
        n = A.shape[1]
        if n < 1:
            violations.append(f'block {i}: dimension n must be at least 1')

        theta = blk.theta
        if isinstance(theta, Quadratic):
            if theta.H.shape != (n, n):
                violations.append(f'block {i}: quadratic H has shape {theta.H.shape}, expected ({n}, {n})')
            elif np.abs(theta.H - theta.H.T).max(initial=0.0) > 1e-12:
                violations.append(f'block {i}: quadratic H is not symmetric')
            if theta.c.shape != (n,):
                violations.append(f'block {i}: quadratic c has length {theta.c.size}, expected {n}')
        elif isinstance(theta, WeightedL1):
            if not theta.tau >= 0:
                violations.append(f'block {i}: l1 weight tau must be nonnegative')
        elif not isinstance(theta, (Zero, Custom)):
            violations.append(f'block {i}: unknown theta atom {type(theta).__name__}')

        s = blk.set
        if isinstance(s, Box):
            if s.lo.shape != (n,) or s.hi.shape != (n,):
                violations.append(f'block {i}: box bounds have wrong length')
            elif np.any(s.lo > s.hi):
                violations.append(f'block {i}: box bounds have lo > hi')
        elif not isinstance(s, (Free, NonNeg)):
            violations.append(f'block {i}: unknown set {type(s).__name__}')

        if blk.orthogonal and A.shape[0] == m and n >= 1:
            gram = A.T @ A
            scale = gram[0, 0]
            if scale <= 0 or np.abs(gram - scale * np.eye(n)).max() > 1e-10 * scale:
                violations.append(f'block {i}: flagged orthogonal but A\'A is not a multiple of I')

    return violations


def objective_value(problem: SeparableProblem, x) -> float:
    if len(x) != problem.p:
        raise DimensionError(f'expected {problem.p} blocks, got {len(x)}')
    return float(sum(blk.theta.value(np.asarray(x_i, dtype=float)) for blk, x_i in zip(problem.blocks, x)))


def lagrangian_value(problem: SeparableProblem, x, lam) -> float:
    """
    L(x, lambda) = sum_i theta_i(x_i) - lambda'(sum_i A_i x_i - b).

    Set membership is not penalized here (it is enforced by the prox module), so the
    value stays finite for infeasible points.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (problem.m,):
        raise DimensionError(f'lambda has shape {lam.shape}, expected ({problem.m},)')
    r = problem.residual(problem.aggregates(x))
    return objective_value(problem, x) - float(lam @ r)


def feasibility_residual(problem: SeparableProblem, a, lam) -> tuple[float, float]:
    """(primal_res, compl_res) for aggregates a and multiplier lam."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (problem.m,):
        raise DimensionError(f'lambda has shape {lam.shape}, expected ({problem.m},)')
    r = problem.residual(a)
    if problem.sense is ConstraintSense.EQUALITY:
        return float(np.linalg.norm(r)), 0.0
    primal_res = float(np.linalg.norm(np.minimum(r, 0.0)))
    compl_res = max(abs(float(lam @ r)), float(np.linalg.norm(np.minimum(lam, 0.0))))
    return primal_res, compl_res


# JSON schema

def _array(obj, key, ndim=1):
    try:
        value = np.asarray(obj[key], dtype=float)
    except KeyError:
        raise ProblemFormatError(key, 'missing')
    except (TypeError, ValueError):
        raise ProblemFormatError(key, 'not a numeric array')
    if value.ndim != ndim:
        raise ProblemFormatError(key, f'expected a {ndim}-d array')
    return value


def _theta_from_dict(obj, key, n):
    kind = obj.get('type') if isinstance(obj, dict) else None
    if kind == 'quadratic':
        H = _array(obj, 'H', ndim=2) if 'H' in obj else np.zeros((n, n))
        c = _array(obj, 'c') if 'c' in obj else np.zeros(n)
        return Quadratic(H, c)
    if kind == 'l1':
        try:
            return WeightedL1(float(obj['tau']))
        except (KeyError, TypeError, ValueError):
            raise ProblemFormatError(f'{key}.tau')
    if kind == 'zero':
        return Zero()
    raise ProblemFormatError(f'{key}.type', f'unknown theta type {kind!r}')


def _set_from_dict(obj, key):
    kind = obj.get('type') if isinstance(obj, dict) else None
    if kind == 'free':
        return Free()
    if kind == 'nonneg':
        return NonNeg()
    if kind == 'box':
        try:
            return Box(_array(obj, 'lo'), _array(obj, 'hi'))
        except ProblemFormatError as e:
            raise ProblemFormatError(f'{key}.{e.key}', e.reason)
    raise ProblemFormatError(f'{key}.type', f'unknown set type {kind!r}')


def problem_from_dict(obj: dict) -> SeparableProblem:
    if not isinstance(obj, dict):
        raise ProblemFormatError('<root>', 'expected an object')
    try:
        m = int(obj['m'])
    except KeyError:
        raise ProblemFormatError('m', 'missing')
    except (TypeError, ValueError):
        raise ProblemFormatError('m', 'not an integer')
    try:
        sense = ConstraintSense(obj.get('sense', 'eq'))
    except ValueError:
        raise ProblemFormatError('sense', 'expected "eq" or "ge"')
    b = _array(obj, 'b')
    if b.shape != (m,):
        raise ProblemFormatError('b', f'expected length {m}')

    raw_blocks = obj.get('blocks')
    if not isinstance(raw_blocks, list) or not raw_blocks:
        raise ProblemFormatError('blocks', 'expected a nonempty array')

    blocks = []
    for i, raw in enumerate(raw_blocks):
        key = f'blocks[{i}]'
        if not isinstance(raw, dict):
            raise ProblemFormatError(key, 'expected an object')
        try:
            A = _array(raw, 'A', ndim=2)
        except ProblemFormatError as e:
            raise ProblemFormatError(f'{key}.{e.key}', e.reason)
        try:
            n = int(raw.get('n', A.shape[1]))
        except (TypeError, ValueError):
            raise ProblemFormatError(f'{key}.n', 'not an integer')
        if A.shape != (m, n):
            raise ProblemFormatError(f'{key}.A', f'expected shape ({m}, {n})')
        try:
            theta = _theta_from_dict(raw['theta'], f'{key}.theta', n)
            set_ = _set_from_dict(raw.get('set', {'type': 'free'}), f'{key}.set')
        except KeyError:
            raise ProblemFormatError(f'{key}.theta', 'missing')
        except ProblemFormatError as e:
            if e.key in ('H', 'c'):
                raise ProblemFormatError(f'{key}.theta.{e.key}', e.reason)
            raise
        blocks.append(BlockSpec(theta, set_, A, orthogonal=bool(raw.get('orthogonal', False))))

    return SeparableProblem(blocks, b, sense, m)


def problem_to_dict(problem: SeparableProblem) -> dict:
    blocks = []
    for i, blk in enumerate(problem.blocks):
        theta = blk.theta
        if isinstance(theta, Quadratic):
            theta_obj = {'type': 'quadratic', 'H': theta.H, 'c': theta.c}
        elif isinstance(theta, WeightedL1):
            theta_obj = {'type': 'l1', 'tau': theta.tau}
        elif isinstance(theta, Zero):
            theta_obj = {'type': 'zero'}
        else:
            raise ProblemFormatError(f'blocks[{i}].theta', 'custom atoms cannot be serialized')

        s = blk.set
        if isinstance(s, Box):
            set_obj = {'type': 'box', 'lo': s.lo, 'hi': s.hi}
        elif isinstance(s, NonNeg):
            set_obj = {'type': 'nonneg'}
        else:
            set_obj = {'type': 'free'}

        block = {'n': blk.n, 'A': blk.A, 'theta': theta_obj, 'set': set_obj}
        if blk.orthogonal:
            block['orthogonal'] = True
        blocks.append(block)

    return {'m': problem.m, 'sense': problem.sense.value, 'b': problem.b, 'blocks': blocks}


def _read_json(path):
    return json.loads(Path(path).read_text('utf-8'))


def _write_json(obj, path):
    Path(path).write_text(json.dumps(obj, cls=NumpyEncoder, indent=1), 'utf-8')


def load_problem(path: str | Path) -> SeparableProblem:
    return problem_from_dict(_read_json(path))


def dump_problem(problem: SeparableProblem, path: str | Path):
    _write_json(problem_to_dict(problem), path)


def _vector_list(obj, key, count=None):
    value = obj.get(key)
    if not isinstance(value, list) or (count is not None and len(value) != count):
        raise ProblemFormatError(key, 'expected one array per block')
    try:
        return [np.asarray(v, dtype=float) for v in value]
    except (TypeError, ValueError):
        raise ProblemFormatError(key, 'not a numeric array')


def load_reference(path: str | Path, problem: SeparableProblem) -> SaddlePoint:
    obj = _read_json(path)
    if not isinstance(obj, dict):
        raise ProblemFormatError('<root>', 'expected an object')
    x = _vector_list(obj, 'x', problem.p) if obj.get('x') is not None else None
    if 'a' in obj:
        a = _vector_list(obj, 'a', problem.p)
    elif x is not None:
        a = problem.aggregates(x)
    else:
        raise ProblemFormatError('a', 'missing (and no x to derive it from)')
    lam = _array(obj, 'lambda')
    if lam.shape != (problem.m,) or any(a_i.shape != (problem.m,) for a_i in a):
        raise ProblemFormatError('lambda', f'expected length {problem.m}')
    objective = obj.get('objective')
    return SaddlePoint(x, a, lam, None if objective is None else float(objective))


def dump_reference(reference: SaddlePoint, path: str | Path):
    _write_json({
        'x': None if reference.x is None else list(reference.x),
        'a': list(reference.a),
        'lambda': reference.lam,
        'objective': reference.objective,
    }, path)


def load_init(path: str | Path, problem: SeparableProblem) -> tuple[list[np.ndarray], np.ndarray]:
    obj = _read_json(path)
    if not isinstance(obj, dict):
        raise ProblemFormatError('<root>', 'expected an object')
    x = _vector_list(obj, 'x', problem.p)
    for i, (blk, x_i) in enumerate(zip(problem.blocks, x)):
        if x_i.shape != (blk.n,):
            raise ProblemFormatError(f'x[{i}]', f'expected length {blk.n}')
    lam = _array(obj, 'lambda') if 'lambda' in obj else np.zeros(problem.m)
    if lam.shape != (problem.m,):
        raise ProblemFormatError('lambda', f'expected length {problem.m}')
    return x, lam
