"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigurationError -> 1,
NumericFailure -> 3.
"""


class ConfigurationError(ValueError):
    """Invalid law, functional, process or experiment configuration."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class NumericFailure(ArithmeticError):
    """A simulated quantity became non-finite."""

    def __init__(self, message: str, step: int | None = None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step
