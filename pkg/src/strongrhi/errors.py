"""Exception hierarchy shared by every module."""


class StrongRHIError(ValueError):
    """Base class for all library errors."""


class InputError(StrongRHIError):
    """Malformed or out-of-range input (grid mismatch, bad exponent, ...)."""


class DegenerateInputError(StrongRHIError):
    """An average was requested over a set of zero measure."""


class PreconditionError(StrongRHIError):
    """A documented precondition of an operation does not hold."""


class UndefinedResultError(StrongRHIError):
    """The requested quantity has no admissible candidates."""


class ConvergenceError(StrongRHIError):
    """An iterative procedure ran out of budget."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
