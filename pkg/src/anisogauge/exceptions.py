"""Exception and warning types raised across the package."""


class AnisoGaugeError(Exception):
    """Base class for all package errors."""


class DomainError(AnisoGaugeError, ValueError):
    """A point lies outside the domain where the quantity is defined."""


class DegeneratePointError(AnisoGaugeError, ValueError):
    """A flux or operator was requested at a critical point of the field."""


class ConvergenceError(AnisoGaugeError, RuntimeError):
    """An iterative solver stopped before meeting its tolerance.

    The best value found so far is kept on ``best_value`` so callers can
    still inspect it.
    """

    def __init__(self, message, best_value=None, best_point=None):
        super().__init__(message)
        self.best_value = best_value
        self.best_point = best_point


class InconsistencyError(AnisoGaugeError, RuntimeError):
    """Two independent estimates of the same quantity disagree."""


class BudgetWarning(UserWarning):
    """A quadrature ran out of evaluations before reaching its target error."""


class RegimeWarning(UserWarning):
    """Parameters lie in a regime where results are formal only (e.g. Q < p)."""
