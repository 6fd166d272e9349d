"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DegenerateError -> 3.
"""


class PredbootError(Exception):
    pass


class DomainError(PredbootError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateError(PredbootError, ArithmeticError):
    """A denominator (moment, instrument energy, residual scale) is zero."""


class ConfigError(PredbootError, ValueError):
    """Invalid experiment configuration. `key` names the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
