"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class NumericalError(ArithmeticError):
    """An iterative routine failed to reach its tolerance."""


class InfeasibleError(ArithmeticError):
    """No parameter value in the search bracket satisfies the requested target."""

    def __init__(self, message, bracket=None, values=None):
        super().__init__(message)
        self.bracket = bracket
        self.values = values
