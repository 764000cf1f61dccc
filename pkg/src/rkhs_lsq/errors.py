"""Exception types shared across modules."""


class DomainError(ValueError):
    """A point lies outside the model's domain."""


class ResourceError(RuntimeError):
    """An enumeration or truncation budget was exhausted.

    ``achieved`` carries the best value reached (radius, remainder, ...).
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class RankDeficientError(ArithmeticError):
    """The sampling matrix does not have full column rank."""

    def __init__(self, message, rank):
        super().__init__(message)
        self.rank = rank


class EnvelopeViolation(RuntimeError):
    """A proposal had density above the rejection envelope."""

    def __init__(self, message, observed):
        super().__init__(message)
        self.observed = observed


class GuaranteeError(RuntimeError):
    """A result failed its a-posteriori check."""
