"""Exception hierarchy shared by every module of the package."""


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class CountOverflowError(OverflowError):
    """Raised when a monomial count does not fit in a signed 64-bit integer."""


class DimensionCapError(InvalidInputError):
    """Raised when a lifted feature space exceeds the configured cap."""


class UndefinedClassRiskError(ValueError):
    """Raised when a class-conditional error rate has an empty denominator."""


class InvalidDistributionError(ValueError):
    """Raised for covariance matrices that are not symmetric positive definite."""


class NotApplicableError(ValueError):
    """Raised when a closed form is requested outside its domain of validity."""


class UnboundedComplexityError(ArithmeticError):
    """Raised when no finite sample size attains the requested accuracy."""


class DataError(ValueError):
    """Raised for unreadable or inconsistent dataset files."""


class ParseError(DataError):
    """A malformed line in a dataset or configuration file."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
