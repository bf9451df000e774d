"""Exception hierarchy shared across the package.

``DomainError`` and subclasses signal physically or numerically invalid
inputs (CLI exit code 1).  ``ConfigError`` signals malformed configuration
(CLI exit code 2).
"""


class MetarelayError(Exception):
    """Base class for all package errors."""


class DomainError(MetarelayError, ValueError):
    """Physically invalid input or an unresolvable numerical condition."""


class PoleError(DomainError):
    """Evaluation landed exactly on a resonance pole."""


class SingularityError(DomainError):
    """A denominator collapsed below the numerical floor."""


class CoverageError(DomainError):
    """Lookup-table synthesis could not cover enough phase bins."""


class ConfigError(MetarelayError):
    """Malformed or missing configuration."""
