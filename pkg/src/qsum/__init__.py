"""Incremental quasi-subgradient methods for sums of quasi-convex functions."""

from .errors import (
    ConfigurationError,
    ContractViolationError,
    DegenerateDirectionError,
    DomainError,
    InfeasibleSetError,
    InvalidArgumentError,
    NumericError,
    ProjectionWarning,
    QsumError,
)
from .problem import (
    ComponentFunction,
    HoelderParams,
    OptimumMeta,
    SumProblem,
    component_values,
    evaluate_sum,
    is_at_component_optimum,
    l_max,
)
from .problems import (
    MCDPEInstance,
    generate_mcdpe,
    make_example3,
    make_example4,
    make_feasibility_problem,
    random_feasibility_problem,
)
from .projections import Box, Halfspace, NonnegOrthant, Polyhedron, SingleHalfspace, WholeSpace, project_polyhedron
from .solvers import (
    RunResult,
    Status,
    StopCriteria,
    classical_run,
    incsgm_cycle,
    incsgm_run,
    randsgm_run,
    randsgm_step,
    sgpm_run,
)
from .stepsize import Constant, Diminishing, DynamicI, DynamicII, c_pm, r_pm, tolerance_ratio

__version__ = "0.1.0"
