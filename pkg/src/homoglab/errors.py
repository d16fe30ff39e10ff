"""Exception hierarchy shared across the package."""


class HomoglabError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(HomoglabError):
    """Input or configuration violates a documented precondition.

    Carries the full list of violations so a caller can report them all
    at once instead of one per run.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NonPositiveProfile(ValidationError):
    """Interface profile takes a value <= 0 somewhere."""


class NotPeriodic(ValidationError):
    """Interface profile endpoint values differ."""


class InterfaceEscapesDomain(ValidationError):
    """Scaled interface amplitude reaches or exceeds the half-height."""


class ResolutionMismatch(ValidationError):
    """Requested mesh resolution is incompatible with the profile or domain."""


class SingularAfterBC(HomoglabError):
    """Dirichlet elimination left an empty row (mesh defect)."""


class NoInterface(HomoglabError):
    """Operation requires duplicated interface nodes but the mesh has none."""


class PointOutsideDomain(HomoglabError):
    """Evaluation point lies outside the mesh."""


class LineSearchStalled(HomoglabError):
    """Armijo backtracking failed to find a descent step."""


class LinearSolveFailure(HomoglabError):
    """Inner linear solve (PCG) broke down."""


class SingularCellSystem(HomoglabError):
    """Periodic cell system could not be solved."""


class NotCaseA(HomoglabError):
    """Interface constant requested outside the transmission regime."""


class RegimeMismatch(HomoglabError):
    """Limit solver invoked with an inconsistent regime tag."""


class UsageError(HomoglabError):
    """Malformed command line; maps to exit code 64."""


class IoFailure(HomoglabError):
    """Report artifact could not be written."""
