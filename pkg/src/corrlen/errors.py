"""Exception hierarchy shared by the numerical modules and the CLI."""


class ValidationError(ValueError):
    """Bad input such as a malformed config or an out-of-range parameter."""


class NumericFailure(RuntimeError):
    """A computation could not reach its stated accuracy."""


class DualVectorError(NumericFailure):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ProfileBracketError(NumericFailure):
    """Bisection for the boundary profile could not bracket a root."""

    def __init__(self, message, tau=None):
        super().__init__(message)
        self.tau = tau


class KernelTruncationError(NumericFailure):
    def __init__(self, message, suggested_R=None):
        super().__init__(message)
        self.suggested_R = suggested_R


class SeriesUnderflowError(NumericFailure):
    pass


class EnumerationBudgetError(NumericFailure):
    def __init__(self, message, projected=None):
        super().__init__(message)
        self.projected = projected
