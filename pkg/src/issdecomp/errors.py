"""Exception hierarchy."""


class IssError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(IssError, ValueError):
    """Invalid arguments: wrong lengths, violated preconditions."""


class DegenerateCandidateError(ArgumentError):
    """A candidate vector lies in the kernel of the operator (Ku = 0)."""


class KernelDataError(ArgumentError):
    """Data lies in the kernel of the adjoint (K*f = 0)."""


class OrderingError(ArgumentError):
    """The ratios lambda_k / gamma_k are not strictly increasing."""


class SolverError(IssError, RuntimeError):
    """An inner solver failed to converge within its budget."""


class TrajectoryRangeError(IssError, ValueError):
    """Evaluation time outside the span covered by a trajectory."""


class ScenarioLookupError(IssError, KeyError):
    """Unknown scenario name."""
