"""Shared exception types. The CLI maps these onto exit codes."""


class ValidationError(ValueError):
    """Input violates a structural contract (symmetry, normalization, shape)."""


class ModelFormatError(ValidationError):
    """Model file could not be parsed; carries line/field context in the message."""


class GapViolationError(RuntimeError):
    """The doubled-Hessian gap is not positive; downstream quadratic step refused."""

    def __init__(self, eta: float, message: str | None = None):
        self.eta = eta
        super().__init__(message or f"Hessian gap violated: eta = {eta:.6e} <= 0")


class ConvergenceError(RuntimeError):
    """Iterative solver did not reach its tolerance; carries best residuals."""

    def __init__(self, message: str, residuals=None):
        self.residuals = residuals
        super().__init__(message)


class ResourceLimitError(RuntimeError):
    """A configured dimension cap would be exceeded; carries the estimate."""

    def __init__(self, message: str, estimate: int | None = None):
        self.estimate = estimate
        super().__init__(message)
