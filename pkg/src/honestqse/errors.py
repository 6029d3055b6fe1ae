"""Exception hierarchy shared by all honestqse modules."""


class HonestQSEError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(HonestQSEError, ValueError):
    """An argument violates a documented precondition."""


class InvalidStateError(InvalidInputError):
    """A matrix failed one of the density-matrix / POVM checks.

    ``check`` names the failing invariant and ``residual`` is the measured
    violation, so callers (and the CLI) can report both.
    """

    def __init__(self, check, residual, message=None):
        self.check = check
        self.residual = float(residual)
        if message is None:
            message = f"{check} check failed (residual {self.residual:.3g})"
        super().__init__(message)


class DimensionMismatchError(InvalidInputError):
    pass


class NumericalError(HonestQSEError, RuntimeError):
    """An eigensolver or other numerical routine failed to converge."""


class ResourceError(HonestQSEError):
    """A configured size cap would be exceeded."""


class DegeneratePosteriorError(HonestQSEError):
    """The measurement record has zero likelihood under every particle."""
