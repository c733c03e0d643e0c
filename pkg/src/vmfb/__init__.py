"""Variable-metric forward-backward splitting and derived primal-dual solvers.

A dense desk-scale toolkit: SPD metric calculus, a closed-form prox and
projection catalog, certified metric/step/error schedules with hypothesis
validators, the core splitting iteration with quasi-Fejer diagnostics, two
primal-dual solvers for composite inclusions, brute-force verification
oracles, and a config-driven CLI experiment runner.
"""

from .metric import (
    DimensionMismatch,
    Metric,
    MetricError,
    as_vector,
    loewner_geq,
    metric_inner,
    metric_inverse,
    metric_norm,
    metric_sqrt,
)
from .catalog import (
    AbsValue,
    AffineSubspace,
    Ball,
    Box,
    CatalogError,
    EuclideanNorm,
    HalfLine,
    HalfSpace,
    Indicator,
    L1Norm,
    Quadratic,
    ScalarComposition,
    ScalarQuadratic,
    Singleton,
    Support,
    Zero,
    least_squares,
    prox_metric,
    prox_metric_via_conjugate,
    prox_quadratic_metric,
    project_metric,
    support_prox_metric,
)
from .operators import (
    CocoerciveOperator,
    LinearMap,
    ResolventOperator,
    block_metric,
    block_of,
    block_resolvent,
    cocoercive_sum,
    linear_monotone,
    normal_cone,
    resolvent_inverse_identity,
    resolvent_metric,
    subdifferential,
    zero_operator,
)
from .schedules import (
    ErrorSchedule,
    MetricSchedule,
    ScheduleValidationError,
    StepSchedule,
    ValidationReport,
    auto_steps,
    block_schedule,
    constant_schedule,
    constant_steps,
    geometric_errors,
    increasing_schedule,
    perturbed_schedule,
    scalar_schedule,
    validate_corollary62,
    validate_theorem41,
    zero_errors,
)
from .forward_backward import (
    FBProblem,
    SolveTrace,
    StoppingRule,
    b_drift_diagnostic,
    fb_minimize,
    fb_solve,
    fb_variational_inequality,
    fejer_diagnostic,
)
from .strong_duality import (
    DualBlock,
    DualityErrors,
    StronglyMonotoneProblem,
    beta_dual,
    primal_recovery,
    solve_best_approximation,
    solve_strong_duality,
    solve_strongly_convex_min,
)
from .cocoercive_duality import (
    CocoerciveErrors,
    CocoerciveProblem,
    ProductPoint,
    kkt_residual,
    solve_cocoercive_pd,
    solve_composite_min,
)
from .oracles import (
    OracleFailure,
    OracleSolution,
    qp_oracle,
    reference_fb,
    scalar_prox_oracle,
)

__version__ = "0.1.0"
