"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 for configuration or
usage problems, 3 for invalid data, 4 for numerically degenerate input.
"""


class FingerSenseError(Exception):
    exit_code = 1


class ConfigError(FingerSenseError, ValueError):
    exit_code = 2


class ScenarioValidationError(ConfigError):
    pass


class DataValidationError(FingerSenseError, ValueError):
    exit_code = 3


class DomainError(DataValidationError):
    """An argument lies outside the domain of a function."""


class InsufficientDataError(DataValidationError):
    pass


class MissingPhaseError(DataValidationError):
    pass


class StreamOrderError(DataValidationError):
    pass


class DimensionError(DataValidationError):
    pass


class NumericalDegeneracyError(FingerSenseError, ArithmeticError):
    exit_code = 4


class SingularDesignError(NumericalDegeneracyError):
    pass


class DegenerateRangeError(NumericalDegeneracyError):
    pass


class ZeroSensitivityError(NumericalDegeneracyError):
    pass


class DegenerateCycleError(NumericalDegeneracyError):
    pass


class DegenerateVarianceError(NumericalDegeneracyError):
    pass


class DegenerateResidualError(NumericalDegeneracyError):
    pass


class DegenerateExponentError(NumericalDegeneracyError):
    pass
