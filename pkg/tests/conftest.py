from pathlib import Path

import numpy as np
import pytest

from pcadmm.model import BlockSpec, ConstraintSense, Free, Quadratic, SeparableProblem


@pytest.fixture
def test_data_root():
    return Path(__file__).parent / 'data'


@pytest.fixture
def input_data_root(test_data_root):
    return test_data_root / 'input'


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def scalar_toy():
    """min 1/2 x^2  s.t.  x = 1, with x* = 1 and lambda* = 1."""
    return SeparableProblem([BlockSpec(Quadratic([[1.0]], [0.0]), Free(), [[1.0]])], [1.0])


@pytest.fixture
def scalar_ge_toy():
    """min 1/2 (x - 2)^2  s.t.  x >= 1, with x* = 2 and lambda* = 0."""
    return SeparableProblem([BlockSpec(Quadratic([[1.0]], [-2.0]), Free(), [[1.0]])], [1.0],
                            ConstraintSense.GREATER_EQUAL)
