"""Exception and warning types shared across the package."""


class CPSRError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(CPSRError, ValueError):
    """An input lies outside the domain where a formula is defined."""


class ConfigError(CPSRError, ValueError):
    """A configuration file or object is malformed or inconsistent."""


class SingularityError(CPSRError, ZeroDivisionError):
    pass


class NumericalError(CPSRError, RuntimeError):
    """Base class for numerical failures (exit code 2 at the CLI)."""


class IntegrationError(NumericalError):
    """Time integration produced non-finite values.

    The ``state`` attribute carries the last finite state for diagnosis.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ConvergenceError(NumericalError):
    """The demodulated output did not settle between consecutive windows."""


class RefinementError(NumericalError):
    """The spatial grid is too coarse for the Faraday rotation per cell."""


class FitError(NumericalError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DataError(CPSRError, ValueError):
    pass


class ScenarioLookupError(CPSRError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ModelValidityWarning(UserWarning):
    """The inputs leave the regime in which the reduced model is valid."""
