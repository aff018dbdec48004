"""Exception hierarchy shared across the package."""


class CmjpError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(CmjpError):
    """Input data or parameters violate a documented invariant."""


class NumericalError(CmjpError):
    """A numerical routine left its supported domain."""


class SingularMatrixError(NumericalError):
    """Matrix inversion failed because the matrix is numerically singular."""


class DegeneratePosteriorError(NumericalError):
    """Every regime assigns probability zero to the observed history."""


class EstimationError(CmjpError):
    """Model fitting could not produce a usable estimate."""
