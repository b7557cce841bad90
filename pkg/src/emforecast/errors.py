"""Exception and warning types shared across the toolkit."""


class ForecastError(Exception):
    """Base class for all toolkit errors."""


class DegenerateInputError(ForecastError, ValueError):
    """Input too short, constant, or otherwise unusable for the operation."""


class RankDeficiencyError(ForecastError, ArithmeticError):
    """Design matrix is singular beyond the jitter tolerance."""


class InversionMismatchError(ForecastError, ValueError):
    """A ledger entry does not match the series it is asked to invert."""


class DivergenceError(ForecastError, ArithmeticError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class NonFiniteStepError(ForecastError, ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DataFormatError(ForecastError, ValueError):
    """Malformed CSV input; message carries the offending line."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class ConfigError(ForecastError, ValueError):
    pass


class ConvergenceWarning(UserWarning):
    pass


class NumericalWarning(UserWarning):
    pass
