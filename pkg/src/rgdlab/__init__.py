"""Riemannian gradient descent laboratory: manifolds, test costs, optimizers
with fixed and backtracked step sizes, iteration-map analysis and Monte Carlo
saddle-avoidance experiments."""

from .analysis import (
    DifferentialMatrix,
    FixedStepMap,
    ProximalMap,
    SingularSet,
    StepSizeBound,
    hess_dist_consistency,
    iteration_map_differential,
    singular_alpha_scan,
    step_size_bound,
    unstable_spectrum,
)
from .costs import CostModel, CriticalLabel, builtin_cost, classify_critical_point
from .errors import (
    ConfigurationError,
    DomainError,
    InnerSolverFailure,
    IterateDomainError,
    LineSearchFailure,
    PreconditionError,
    RGDLabError,
)
from .experiments import (
    AvoidanceReport,
    Classification,
    ExperimentPlan,
    RunOutcome,
    classify_limit,
    monte_carlo_avoidance,
    step_stabilization_audit,
)
from .geometry import (
    Euclidean,
    Hyperbolic,
    ProductSpheres,
    Retraction,
    Sphere,
    Stiefel,
    make_manifold,
)
from .optimizers import (
    LineSearchConfig,
    StopRule,
    Termination,
    Trajectory,
    fixed_step_run,
    proximal_point_run,
    stabilized_armijo_run,
    standard_armijo_run,
)

__version__ = "0.1.0"
