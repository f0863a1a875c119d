"""Periodic generalized linear differential equations with Kurzweil-Stieltjes integrals.

Transition matrices across jumps, Floquet multipliers, the exponential
dichotomy test and periodic solutions of forced equations.
"""

from .bv import BVMatrixFunction, JumpEvent, PiecewisePoly, RegulatedVectorFunction
from .core import (
    GLDESystem,
    HReport,
    Propagator,
    Trajectory,
    check_H,
    integral_equation_residual,
    one_sided_transition,
    propagate,
    transition_matrix,
    voc_crosscheck,
)
from .errors import ConditionHError, ConsistencyError, DimensionError, GLDEError, ResonanceError
from .floquet import (
    DichotomyReport,
    FloquetDecomposition,
    MonodromyData,
    dichotomy_bound_audit,
    dichotomy_check,
    floquet_decompose,
    monodromy,
    multiplier_solution_check,
)
from .ks import gauge_oracle_integrate, ks_integrate, partition_variation, variation
from .periodic import (
    PeriodicSolutionResult,
    dichotomy_representation_x0,
    periodic_initial_condition,
    periodic_solution,
)
from .testkit import NamedExample, builtin_examples, get_example

__version__ = "0.1.0"
