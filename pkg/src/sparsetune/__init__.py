"""Tuned iterative thresholding for sparse recovery, with phase-transition tooling."""

from .exceptions import *  # noqa: F401,F403
from .operators import (
    MatrixEnsemble,
    SensingOperator,
    apply_adjoint,
    apply_forward,
    least_squares_on_support,
    sample_operator,
)
from .recommended import recommended_config
from .solvers import Algorithm, SolverConfig, SolveResult, run_ist_iht, run_tst, solve
from .suites import (
    STANDARD_SUITE,
    CoefficientEnsemble,
    ProblemInstance,
    ProblemSuite,
    generate_instance,
    sample_sparse_vector,
    success,
)
from .thresholding import (
    FAR,
    FixedRho,
    OracleK,
    far_to_lambda,
    hard_threshold,
    robust_sigma,
    select_threshold,
    soft_threshold,
)

__version__ = "0.1.0"

from .estimators import IterativeThresholding, TwoStageThresholding  # noqa: E402
from .transition import (  # noqa: E402
    ExperimentGrid,
    Recommended,
    TransitionCell,
    TransitionEstimate,
    estimate_transition,
    fit_logistic,
    maximin_tune,
    run_cell,
    run_grid,
    tune,
)
