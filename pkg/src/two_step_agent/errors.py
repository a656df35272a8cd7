"""Exception types raised across the simulator."""


class TwoStepError(Exception):
    """Base class for all simulator errors."""


class EmptyCohortError(TwoStepError, ValueError):
    pass


class DegenerateDesignError(TwoStepError, ValueError):
    """Raised when sum(x**2) == 0 so the slope is not identified."""


class DegenerateCompositionError(TwoStepError, ValueError):
    def __init__(self, message, aux=None):
        super().__init__(message)
        self.aux = aux


class InsufficientDofError(TwoStepError, ValueError):
    pass


class DiagnosticUnavailableError(TwoStepError, ValueError):
    pass


class UndefinedCorrelationError(TwoStepError, ValueError):
    pass


class InitializationError(TwoStepError, RuntimeError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ConfigError(TwoStepError, ValueError):
    pass
