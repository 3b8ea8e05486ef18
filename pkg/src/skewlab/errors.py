"""Exception types shared across the package."""


class SkewlabError(Exception):
    """Base class for all package-specific errors."""


class NotHyperbolic(SkewlabError):
    """Base matrix has an eigenvalue on or too close to the unit circle."""


class PolicyInfeasible(SkewlabError):
    """A preorbit branch policy has no admissible branch at some step."""


class ShadowBreakdown(SkewlabError):
    """Nearest-branch continuation became ambiguous while shadowing."""


class DegenerateSeed(SkewlabError):
    """Power iteration seed collapsed onto a complementary subspace."""


class LegTooLong(SkewlabError):
    """A leaf-chart parameter left the chart (|t| >= 0.5)."""


class NotAccessibleNumerically(SkewlabError):
    """Holonomy shooting could not reduce the fiber error below tolerance."""

    def __init__(self, message, achieved_error=None):
        super().__init__(message)
        self.achieved_error = achieved_error


class ParseError(SkewlabError):
    """Configuration text could not be parsed."""


class ValidationError(SkewlabError):
    """Configuration parsed but failed semantic validation."""
