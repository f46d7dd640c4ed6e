"""Exception types shared across the package."""

from __future__ import annotations


class NumericalFailure(RuntimeError):
    """A factorization or likelihood evaluation broke down numerically."""

    def __init__(self, message: str, *, condition: float | None = None,
                 iteration: int | None = None, beta: float | None = None):
        super().__init__(message)
        self.condition = condition
        self.iteration = iteration
        self.beta = beta


class IdentifiabilityError(RuntimeError):
    """The missing-data pattern leaves some input samples undetermined."""

    def __init__(self, message: str, *, null_dim: int, report=None):
        super().__init__(message)
        self.null_dim = null_dim
        self.report = report
