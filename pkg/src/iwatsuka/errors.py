"""Exception types shared across the package."""


class IwatsukaError(Exception):
    """Base class for package errors."""


class ProfileError(IwatsukaError, ValueError):
    """Invalid field-profile parameters or description."""


class UnsupportedProfileError(IwatsukaError, TypeError):
    """Operation not defined for this kind of field profile."""


class DomainError(IwatsukaError, ValueError):
    """Argument outside the domain where the quantity exists."""


class AccuracyError(IwatsukaError, ArithmeticError):
    """A numerical tolerance could not be reached.

    ``best`` carries the best accuracy figure reached before giving up.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
