"""Exception hierarchy shared by all modules."""


class ProcrusteanError(Exception):
    """Base class for every error raised by this package."""


class DegenerateConfiguration(ProcrusteanError, ValueError):
    """All landmarks coincide (or nearly so); the pre-shape is undefined."""


class InvalidCutoff(ProcrusteanError, ValueError):
    pass


class EvenK(ProcrusteanError, ValueError):
    pass


class DimensionMismatch(ProcrusteanError, ValueError):
    pass


class SingularAlignment(ProcrusteanError, ArithmeticError):
    """The averaged scale-rotation matrix cannot be inverted."""


class NoConvergence(ProcrusteanError, RuntimeError):
    """An iterative solver hit its iteration cap.

    ``diagnostics`` carries whatever the solver had when it stopped.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class EmptyResult(ProcrusteanError, ValueError):
    pass


class ConfigError(ProcrusteanError, ValueError):
    pass
