"""Exception hierarchy shared across the package.

Configuration problems exit the CLI with code 2, numerical failures with
code 3; everything else is a plain bug.
"""


class LfireError(Exception):
    """Base class for all package errors."""


class ConfigError(LfireError):
    """Invalid configuration: bad fields, unknown keys, shape mismatches."""


class NumericalError(LfireError):
    """A computation failed for numerical reasons."""


class DegenerateInputError(NumericalError):
    """Input degenerate for the requested statistic (zero variance, singular design, ...)."""


class SimulationDivergedError(NumericalError):
    """A trajectory left the finite range during integration."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"state became non-finite at step {step}")


class NonConvergenceError(NumericalError):
    """The path solver exhausted its sweep budget."""

    def __init__(self, lambda_index: int, message: str | None = None):
        self.lambda_index = lambda_index
        super().__init__(
            message or f"coordinate descent did not converge at path index {lambda_index}"
        )


class DegeneratePosteriorError(NumericalError):
    """Every posterior value underflowed to zero."""


class EmptyResultError(NumericalError):
    """An accept/reject procedure returned nothing."""
