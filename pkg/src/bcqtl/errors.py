"""Exception hierarchy shared across the package.

Callers that want a single catch-all can use BcqtlError; the CLI maps the
subclasses onto exit codes (usage 1, data 2, numerical 3).
"""


class BcqtlError(Exception):
    """Base class for all package-specific errors."""


class DomainError(BcqtlError, ValueError):
    """An argument is outside its mathematical domain (r, theta, sigma, ...)."""


class InvalidDataError(BcqtlError, ValueError):
    """Input data violates a structural requirement (empty anchor group, NaN, ...)."""


class DegenerateDataError(InvalidDataError):
    """Data is structurally valid but too degenerate to fit (n1 < 2, constant sample)."""


class ParseError(InvalidDataError):
    """A file could not be parsed; message carries file name and line number."""


class ValidationError(InvalidDataError):
    """Cross-field or cross-file consistency check failed (ids, marker order, ...)."""


class NumericalError(BcqtlError, ArithmeticError):
    """A numerical routine failed to converge or produced a non-finite result."""
