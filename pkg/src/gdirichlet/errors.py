"""Exception hierarchy shared by all modules."""


class GDirichletError(Exception):
    """Base class for library errors."""


class DomainError(GDirichletError, ValueError):
    """Argument outside the domain of a function (e.g. a nonpositive T)."""


class ContractError(GDirichletError, ValueError):
    """Precondition of an operation violated by the caller."""


class BudgetError(GDirichletError, RuntimeError):
    """An enumeration would exceed its candidate budget."""

    def __init__(self, message, attempted=None):
        super().__init__(message)
        self.attempted = attempted


class ExtrapolationError(GDirichletError, ValueError):
    """Evaluation requested outside a certified or tabulated range."""


class CertificateError(GDirichletError, ValueError):
    """A quasimultiplicativity certificate could not be established."""


class RangeError(GDirichletError, ValueError):
    """A certified range is too small for the requested computation."""


class ConfigError(GDirichletError, ValueError):
    """Malformed configuration object."""
