"""Exception hierarchy shared by all stages of the simulator."""


class FasemcomError(Exception):
    """Base class for every error raised by this package."""


class InputError(FasemcomError):
    """Bad input data (maps to CLI exit code 3)."""


class ConfigError(FasemcomError):
    """Invalid experiment configuration (maps to CLI exit code 2)."""


class SimulationError(FasemcomError):
    """Failure while simulating (maps to CLI exit code 4)."""


# keyword extraction
class EmptyInput(InputError):
    pass


class NoCandidates(InputError):
    pass


# semantic matching
class FormatError(InputError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyTable(InputError):
    pass


class AllOutOfVocabulary(InputError):
    pass


class ZeroNorm(SimulationError):
    pass


class EmptyBoxes(InputError):
    pass


# attention maps
class DimensionMismatch(InputError):
    pass


class AlphaOutOfRange(ConfigError):
    pass


class DegenerateImageWarning(UserWarning):
    """Constant image: the saliency map is all zeros."""


# power allocation
class InvalidLevel(SimulationError):
    pass


class NonPositiveBudget(ConfigError):
    pass


# channel
class NonFiniteValue(InputError):
    pass


class GridMismatch(SimulationError):
    pass


class ShapeMismatch(SimulationError):
    pass


class StageError(FasemcomError):
    """Wraps a module error with the pipeline stage that raised it."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
