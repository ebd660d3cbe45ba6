__version__ = '0.1.0'

from pcadmm.matrices import framework_matrices, verify_framework
from pcadmm.model import (
    BlockSpec, Box, ConstraintSense, Free, NonNeg, Quadratic, SeparableProblem, SolverConfig, Variant, WeightedL1,
    Zero, load_problem, validate_problem,
)
from pcadmm.solver import contraction_check, run
