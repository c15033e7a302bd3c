"""Exception types shared across the package."""


class RGDLabError(Exception):
    """Base class for all errors raised by rgdlab."""


class ConfigurationError(RGDLabError, ValueError):
    """Invalid parameters, unsupported combinations or malformed configs."""


class DomainError(RGDLabError, ValueError):
    """An input lies outside the domain where an operation is defined.

    Examples are antipodal points for the sphere logarithm, rank-deficient
    arguments of the polar retraction, or conjugate points along a geodesic.
    """


class PreconditionError(RGDLabError, ValueError):
    """A documented precondition of an analysis routine does not hold."""


class LineSearchFailure(RGDLabError, RuntimeError):
    """The backtracking loop exceeded its shrink cap."""

    def __init__(self, iteration, alpha):
        self.iteration = int(iteration)
        self.alpha = float(alpha)
        super().__init__(
            f"line search failed at iteration {self.iteration} "
            f"(step reached {self.alpha:.3e})"
        )


class InnerSolverFailure(RGDLabError, RuntimeError):
    """The proximal subproblem solver stagnated."""


class IterateDomainError(DomainError):
    """A retraction failed while running an optimizer."""

    def __init__(self, iteration, message="retraction undefined"):
        self.iteration = int(iteration)
        super().__init__(f"{message} at iterate {self.iteration}")
