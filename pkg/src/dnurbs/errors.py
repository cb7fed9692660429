"""Exception hierarchy for the dnurbs package."""


class DnurbsError(Exception):
    """Base class for all dnurbs errors."""


class InvalidKnotVectorError(DnurbsError, ValueError):
    """Knot sequence is decreasing, degenerate, or too short for the order."""


class UnsupportedKnotVectorError(DnurbsError, ValueError):
    """Operation requires an open knot vector (end multiplicity = order)."""


class DomainError(DnurbsError, ValueError):
    """Evaluation parameter lies outside the admissible range."""


class DegenerateWeightsError(DnurbsError, ValueError):
    """Weights violate the positivity bound or the rational denominator vanishes."""


class ConstraintSpecError(DnurbsError, ValueError):
    """Constraint rows are rank-deficient, infeasible, or redundant."""


class ConfigError(DnurbsError, ValueError):
    """Invalid simulation or solver configuration."""


class SolverError(DnurbsError, RuntimeError):
    """Base class for linear-solver failures."""


class SolverDivergenceError(SolverError):
    """Conjugate gradient failed to reach the requested residual.

    Carries the final relative residual and the number of iterations performed.
    """

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NotPositiveDefiniteError(SolverError):
    """Operator produced a non-positive curvature direction during CG."""


class SimulationError(DnurbsError, RuntimeError):
    """A time step failed; carries the step index and the underlying cause."""

    def __init__(self, step, cause):
        super().__init__(f"simulation aborted at step {step}: {cause}")
        self.step = step
        self.cause = cause
